//! Minimum-compliance table in 2D, with and without the cavity constraint.
//! Prints both final designs: `#` material, `o` enclosed void.
//!
//! `cargo run --release --example table_compliance`

use std::path::Path;

use topopt::config::parse_config;
use topopt::mesh::generate_box_mesh;
use topopt::optimizer::{run, OptimizationProblem, Snapshot};

fn picture(mesh: &topopt::mesh::SimplexMesh, s: &Snapshot, cols: usize, rows: usize, upper: [f64; 2]) {
    let mut cells = vec![(0.0, 0usize, false); cols * rows];
    let enclosed = s.voids.enclosed_mask();
    for e in 0..mesh.num_elements() {
        let c = mesh.element_centroid(e);
        let i = ((c[0] / upper[0] * cols as f64) as usize).min(cols - 1);
        let j = ((c[1] / upper[1] * rows as f64) as usize).min(rows - 1);
        let cell = &mut cells[j * cols + i];
        cell.0 += s.chi[e];
        cell.1 += 1;
        cell.2 |= enclosed[e];
    }
    for j in (0..rows).rev() {
        let line: String = (0..cols)
            .map(|i| match cells[j * cols + i] {
                (_, _, true) => 'o',
                (sum, n, _) if n > 0 && sum / n as f64 >= 0.5 => '#',
                _ => ' ',
            })
            .collect();
        println!("|{line}|");
    }
}

fn main() -> topopt::Result<()> {
    env_logger::init();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/table_2d.toml");
    let config = parse_config(&std::fs::read_to_string(&path).expect("config is readable"))?;
    let mesh = generate_box_mesh(&config.mesh)?;
    for enforce in [false, true] {
        let mut problem = OptimizationProblem::new(
            &mesh,
            config.objective().expect("compliance section"),
            config.cavity.clone(),
            config.design.volume_fraction,
        );
        problem.enforce_cavity = enforce;
        problem.evolution = config.evolution.clone();
        problem.rules = config.rules.clone();
        problem.non_design = config.non_design_mask(&mesh);
        let state = run(&problem, &config.stop, |_, _| Ok(()))?;
        let last = state.history.last().unwrap();
        println!(
            "cavity constraint {}: objective {:.4}, volume {:.4}, {} iterations (converged {}), {} enclosed voids",
            if enforce { "on" } else { "off" },
            last.objective,
            last.volume_fraction,
            state.iteration,
            state.converged,
            state.last.voids.enclosed.len()
        );
        picture(&mesh, &state.last, 80, 20, [2.0, 1.0]);
    }
    Ok(())
}
