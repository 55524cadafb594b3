//! One PASS/FAIL line per acceptance criterion.
//!
//! Criteria listed in `KNOWN_GAPS` are reported but do not fail the
//! process; see the README for why they are not met.

mod common;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use common::metrics::{doubling_ratios, elasticity_error, fd_sign_agreement, flood_fill_agreement, poisson_error, worst_adjoint_gap};
use tempfile::TempDir;
use topopt::config::{parse_config, RunConfig};
use topopt::scenario::{run_scenario, Summary};

const KNOWN_GAPS: &[u32] = &[2, 5];

const C1_MAX_SECONDS: f64 = 30.0;
const C2_MIN_AGREEMENT: f64 = 0.95;
const C3_MAX_ADJOINT_GAP: f64 = 1e-8;
const C3_MIN_SIGN_AGREEMENT: f64 = 0.95;
const C4_MIN_RATIO: f64 = 3.5;
const C5_MAX_ITERATIONS: usize = 200;
const C5_VOLUME_TOL: f64 = 0.01;
const C5_MAX_GAP: f64 = 0.05;
const C5_MAX_SECONDS: f64 = 600.0;
const C6_MAX_SECONDS: f64 = 1800.0;
const C7_MAX_GAP: f64 = 0.05;

struct Outcome {
    criterion: u32,
    pass: bool,
    detail: String,
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> RunConfig {
    let path = configs_dir().join(name);
    parse_config(&std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display())))
        .unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn run_in(mut config: RunConfig, out: &Path) -> Summary {
    config.output = out.to_path_buf();
    config.snapshot_every = 0;
    run_scenario(&config).unwrap_or_else(|e| panic!("{}: {e}", out.display()))
}

fn relative_gap(constrained: &Summary, unconstrained: &Summary) -> f64 {
    let (c, u) = (constrained.objective.unwrap(), unconstrained.objective.unwrap());
    (c - u) / u
}

fn criterion_1(tmp: &Path) -> Outcome {
    let cases = [
        (1e2, 1e-5, "appropriate"),
        (1e3, 1e-5, "appropriate"),
        (1e1, 1e-5, "inappropriate"),
        (1e0, 1e-5, "inappropriate"),
        (1e2, 1e-4, "inappropriate"),
        (1e2, 1e-3, "inappropriate"),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (a_p, epsilon_p, expected)) in cases.into_iter().enumerate() {
        let mut c = load("fig2_validation.toml");
        c.cavity.a_p = a_p;
        c.cavity.epsilon_p = epsilon_p;
        let s = run_in(c, &tmp.join(format!("c1_{i}")));
        let verdict = s.verdict.unwrap_or("none");
        let ok = verdict == expected && s.wall_time_s < C1_MAX_SECONDS;
        pass &= ok;
        parts.push(format!("a_p={a_p:e} eps={epsilon_p:e} {verdict} ({:.1}s)", s.wall_time_s));
    }
    Outcome {
        criterion: 1,
        pass,
        detail: parts.join("; "),
    }
}

fn criterion_2() -> Outcome {
    let a = flood_fill_agreement();
    Outcome {
        criterion: 2,
        pass: a.raw_rate >= C2_MIN_AGREEMENT,
        detail: format!(
            "agreement {:.4} over {} void elements (>= {C2_MIN_AGREEMENT}); {:.4} over the {} not in corner-contact voids",
            a.raw_rate,
            a.total + a.skipped,
            a.rate,
            a.total
        ),
    }
}

fn criterion_3() -> Outcome {
    let gap = worst_adjoint_gap();
    let (rate, total) = fd_sign_agreement();
    Outcome {
        criterion: 3,
        pass: gap < C3_MAX_ADJOINT_GAP && rate >= C3_MIN_SIGN_AGREEMENT,
        detail: format!(
            "adjoint gap {gap:.2e} (< {C3_MAX_ADJOINT_GAP:e}); FD sign agreement {rate:.3} over {total} elements (>= {C3_MIN_SIGN_AGREEMENT})"
        ),
    }
}

fn criterion_4() -> Outcome {
    let scalar = doubling_ratios(poisson_error);
    let elastic = doubling_ratios(elasticity_error);
    let fmt = |r: &[f64]| r.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join("/");
    Outcome {
        criterion: 4,
        pass: scalar.iter().chain(&elastic).all(|&r| r >= C4_MIN_RATIO),
        detail: format!(
            "error ratios per doubling: scalar {} elasticity {} (>= {C4_MIN_RATIO})",
            fmt(&scalar),
            fmt(&elastic)
        ),
    }
}

fn table_run(tmp: &Path, name: &str, enforce: bool) -> (Summary, Vec<u8>) {
    let mut c = load("table_2d.toml");
    c.design.enforce_cavity = enforce;
    let out = tmp.join(name);
    let s = run_in(c, &out);
    let history = std::fs::read(out.join("history.csv")).unwrap();
    (s, history)
}

fn criterion_5(con: &Summary, unc: &Summary, v_max: f64) -> Outcome {
    let gap = relative_gap(con, unc);
    let vol_ok = |s: &Summary| (s.volume_fraction - v_max).abs() / v_max <= C5_VOLUME_TOL;
    let converged = |s: &Summary| s.converged && s.iterations.unwrap() <= C5_MAX_ITERATIONS;
    let time_ok = con.wall_time_s < C5_MAX_SECONDS && unc.wall_time_s < C5_MAX_SECONDS;
    Outcome {
        criterion: 5,
        pass: converged(con)
            && converged(unc)
            && con.enclosed_components == 0
            && vol_ok(con)
            && vol_ok(unc)
            && gap < C5_MAX_GAP
            && time_ok,
        detail: format!(
            "unconstrained {:.4} ({} it, {:.0}s), constrained {:.4} ({} it, {:.0}s, {} enclosed, volume {:.4}); gap {:+.1}% (< {:.0}%)",
            unc.objective.unwrap(),
            unc.iterations.unwrap(),
            unc.wall_time_s,
            con.objective.unwrap(),
            con.iterations.unwrap(),
            con.wall_time_s,
            con.enclosed_components,
            con.volume_fraction,
            100.0 * gap,
            100.0 * C5_MAX_GAP
        ),
    }
}

fn criterion_6(tmp: &Path) -> Outcome {
    let s = run_in(load("table_3d.toml"), &tmp.join("c6"));
    Outcome {
        criterion: 6,
        pass: s.enclosed_components == 0 && s.wall_time_s < C6_MAX_SECONDS,
        detail: format!(
            "{} enclosed voids after {} iterations (converged {}), {:.0}s (< {C6_MAX_SECONDS:.0}s)",
            s.enclosed_components,
            s.iterations.unwrap(),
            s.converged,
            s.wall_time_s
        ),
    }
}

fn criterion_7(tmp: &Path) -> Outcome {
    let run = |enforce: bool, name: &str| {
        let mut c = load("heat_sink_2d.toml");
        c.design.enforce_cavity = enforce;
        run_in(c, &tmp.join(name))
    };
    let unc = run(false, "c7_unconstrained");
    let con = run(true, "c7_constrained");
    let gap = relative_gap(&con, &unc);
    Outcome {
        criterion: 7,
        pass: unc.enclosed_components > 0 && con.enclosed_components == 0 && gap < C7_MAX_GAP,
        detail: format!(
            "unconstrained {:.6} with {} enclosed, constrained {:.6} with {} enclosed; gap {:+.1}% (< {:.0}%)",
            unc.objective.unwrap(),
            unc.enclosed_components,
            con.objective.unwrap(),
            con.enclosed_components,
            100.0 * gap,
            100.0 * C7_MAX_GAP
        ),
    }
}

fn report(o: &Outcome) {
    let status = if o.pass { "PASS" } else { "FAIL" };
    let note = if !o.pass && KNOWN_GAPS.contains(&o.criterion) {
        " [known gap]"
    } else {
        ""
    };
    println!("criterion {}: {status}{note}: {}", o.criterion, o.detail);
}

fn main() -> ExitCode {
    let start = Instant::now();
    let tmp = TempDir::new().expect("temporary directory");
    let dir = tmp.path();
    let mut outcomes = Vec::new();
    let mut record = |o: Outcome| {
        report(&o);
        outcomes.push(o);
    };

    record(criterion_1(dir));
    record(criterion_2());
    record(criterion_3());
    record(criterion_4());

    let v_max = load("table_2d.toml").design.volume_fraction;
    let (unc, _) = table_run(dir, "c5_unconstrained", false);
    let (con, first) = table_run(dir, "c5_constrained", true);
    record(criterion_5(&con, &unc, v_max));
    record(criterion_6(dir));
    record(criterion_7(dir));

    let (_, second) = table_run(dir, "c8_repeat", true);
    record(Outcome {
        criterion: 8,
        pass: first == second,
        detail: format!("two constrained table runs, history CSVs of {} and {} bytes identical: {}", first.len(), second.len(), first == second),
    });

    let unexpected: Vec<u32> = outcomes
        .iter()
        .filter(|o| !o.pass && !KNOWN_GAPS.contains(&o.criterion))
        .map(|o| o.criterion)
        .collect();
    println!("acceptance finished in {:.0}s", start.elapsed().as_secs_f64());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
