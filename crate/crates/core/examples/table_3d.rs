//! The 3D table with the cavity constraint. Takes a few minutes; pass an
//! iteration cap as the first argument for a shorter run.
//!
//! `cargo run --release --example table_3d -- 20`

use std::path::Path;

use topopt::config::parse_config;
use topopt::scenario::run_scenario;

fn main() -> topopt::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/table_3d.toml");
    let mut c = parse_config(&std::fs::read_to_string(&path).expect("config is readable"))?;
    if let Some(cap) = std::env::args().nth(1) {
        c.stop.max_iterations = cap.parse().expect("iteration cap is an integer");
    }
    c.output = "output/examples/table_3d".into();
    let s = run_scenario(&c)?;
    println!(
        "objective {:.4}, volume {:.4}, {} enclosed voids, converged {} after {} iterations in {:.0}s",
        s.objective.unwrap(),
        s.volume_fraction,
        s.enclosed_components,
        s.converged,
        s.iterations.unwrap(),
        s.wall_time_s
    );
    println!("snapshots and final.vtk in {}", c.output.display());
    Ok(())
}
