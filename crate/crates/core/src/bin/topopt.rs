use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use topopt::config::{parse_config, RunConfig, ScenarioKind};
use topopt::io::json_string;
use topopt::scenario::{run_scenario, run_sweep};
use topopt::{Error, Result};

/// Level-set topology optimization without enclosed cavities.
#[derive(Parser)]
#[command(name = "topopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long = "max-iters")]
        max_iters: Option<usize>,
        #[arg(long = "snapshot-every")]
        snapshot_every: Option<usize>,
    },
    /// Run the scenario once per value of one config parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted config path, e.g. `cavity.a_p`.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Label the void components of the config's geometry.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn load(path: &Path) -> Result<RunConfig> {
    parse_config(&read(path)?)
}

/// Worker count from `TOPOPT_THREADS`, if set.
fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("TOPOPT_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("TOPOPT_THREADS must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

fn execute(cli: Cli) -> Result<u8> {
    let threads = thread_cap()?;
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot size worker pool: {e}")))?;
    }
    match cli.command {
        Command::Run {
            config,
            output,
            max_iters,
            snapshot_every,
        } => {
            let mut c = load(&config)?;
            if let Some(o) = output {
                c.output = o;
            }
            if let Some(n) = max_iters {
                c.stop.max_iterations = n;
            }
            if let Some(n) = snapshot_every {
                c.snapshot_every = n;
            }
            let summary = run_scenario(&c)?;
            print!("{}", json_string(&summary)?);
            Ok(summary.exit_code() as u8)
        }
        Command::Sweep {
            config,
            param,
            values,
            output,
        } => {
            let text = read(&config)?;
            let rows = run_sweep(&text, &param, &values, output.as_deref(), threads)?;
            println!("{:>12}  {:>10}  {:>10}  result", param, "a_p", "epsilon_p");
            for r in &rows {
                println!("{:>12}  {:>10e}  {:>10e}  {}", r.value, r.a_p, r.epsilon_p, r.result);
            }
            let worst = rows.iter().map(|r| r.exit_code).fold(0, |acc, c| match (acc, c) {
                (1, _) | (_, 1) => 1,
                (2, _) | (_, 2) => 2,
                _ => 0,
            });
            Ok(worst as u8)
        }
        Command::Oracle { config, output } => {
            let mut c = load(&config)?;
            if c.geometry.is_none() {
                return Err(Error::Validation {
                    field: "geometry".into(),
                    message: "section is required for the oracle".into(),
                });
            }
            c.scenario = ScenarioKind::OracleCheck;
            if let Some(o) = output {
                c.output = o;
            }
            let summary = run_scenario(&c)?;
            print!("{}", json_string(&summary)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
