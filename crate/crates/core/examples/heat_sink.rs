//! Heat-conduction design cooled through two bottom patches. Without the
//! cavity constraint the optimum encloses a void under the top plate; with
//! it every void reaches the sides or the top.
//!
//! `cargo run --release --example heat_sink`

use std::path::Path;

use topopt::config::parse_config;
use topopt::scenario::run_scenario;

fn main() -> topopt::Result<()> {
    env_logger::init();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/heat_sink_2d.toml");
    let base = parse_config(&std::fs::read_to_string(&path).expect("config is readable"))?;
    let mut objectives = Vec::new();
    for enforce in [false, true] {
        let mut c = base.clone();
        c.design.enforce_cavity = enforce;
        c.output = format!("output/examples/heat_sink_{}", if enforce { "constrained" } else { "free" }).into();
        let s = run_scenario(&c)?;
        println!(
            "cavity constraint {}: thermal compliance {:.6}, {} enclosed voids, converged {} after {} iterations; files in {}",
            if enforce { "on" } else { "off" },
            s.objective.unwrap(),
            s.enclosed_components,
            s.converged,
            s.iterations.unwrap(),
            c.output.display()
        );
        objectives.push(s.objective.unwrap());
    }
    println!("constrained/unconstrained objective ratio {:.3}", objectives[1] / objectives[0]);
    Ok(())
}
