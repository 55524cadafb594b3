//! L2 error of the P1 solvers against `u = sin πx sin πy` on refined unit
//! squares; the error drops by about 4 per mesh doubling.

use std::f64::consts::PI;

use topopt::fem::{
    assemble_elasticity, assemble_scalar, lame_parameters, solve, Dirichlet, ElasticityProblem, ScalarDiffusionProblem,
    Support,
};
use topopt::mesh::{generate_box_mesh, BoxSpec, SimplexMesh, DEFAULT_TAG};

fn bump(x: [f64; 3]) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).sin()
}

fn l2(mesh: &SimplexMesh, err: impl Iterator<Item = f64>) -> f64 {
    err.zip(mesh.lumped_mass()).map(|(e, m)| m * e * e).sum::<f64>().sqrt()
}

fn poisson(mesh: &SimplexMesh) -> topopt::Result<f64> {
    let ne = mesh.num_elements();
    let mut problem = ScalarDiffusionProblem::new(vec![1.0; ne], vec![0.0; ne], vec![0.0; ne])
        .with_dirichlet(Dirichlet::tag(DEFAULT_TAG, 0.0));
    problem.nodal_source = Some(mesh.nodes().iter().map(|&x| 2.0 * PI * PI * bump(x)).collect());
    let u = solve(&assemble_scalar(mesh, &problem)?, 1e-12)?;
    Ok(l2(mesh, u.iter().zip(mesh.nodes()).map(|(u, &x)| u - bump(x))))
}

fn elasticity(mesh: &SimplexMesh) -> topopt::Result<f64> {
    let (lambda, mu) = lame_parameters(1.0, 0.3);
    let mut problem = ElasticityProblem::new(1.0, 0.3, vec![1.0; mesh.num_elements()]);
    problem.supports.push(Support::clamped(DEFAULT_TAG));
    problem.body_force = Some(
        mesh.nodes()
            .iter()
            .map(|&x| {
                let cc = (PI * x[0]).cos() * (PI * x[1]).cos();
                let f = (lambda + mu) * PI * PI * (bump(x) - cc) + 2.0 * mu * PI * PI * bump(x);
                [f, f, 0.0]
            })
            .collect(),
    );
    let u = solve(&assemble_elasticity(mesh, &problem)?, 1e-12)?;
    let err = (0..mesh.num_nodes()).flat_map(|v| {
        let exact = bump(mesh.node(v));
        [u[2 * v] - exact, u[2 * v + 1] - exact]
    });
    // Each node carries two components; pair each with the node's mass.
    let mass: Vec<f64> = mesh.lumped_mass().iter().flat_map(|&m| [m, m]).collect();
    Ok(err.zip(&mass).map(|(e, m)| m * e * e).sum::<f64>().sqrt())
}

fn main() -> topopt::Result<()> {
    println!("{:>5} {:>12} {:>7} {:>12} {:>7}", "n", "scalar", "ratio", "elasticity", "ratio");
    let mut prev: Option<(f64, f64)> = None;
    for n in [8, 16, 32, 64, 128] {
        let mesh = generate_box_mesh(&BoxSpec::new_2d([0.0, 0.0], [1.0, 1.0], [n, n]))?;
        let (s, e) = (poisson(&mesh)?, elasticity(&mesh)?);
        let (rs, re) = prev.map_or(("-".into(), "-".into()), |(ps, pe)| (format!("{:.2}", ps / s), format!("{:.2}", pe / e)));
        println!("{n:>5} {s:>12.4e} {rs:>7} {e:>12.4e} {re:>7}");
        prev = Some((s, e));
    }
    Ok(())
}
