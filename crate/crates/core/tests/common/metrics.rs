//! Measurements shared by the property tests and the acceptance harness.

use std::f64::consts::PI;

use topopt::cavity::{constraint_value, sharpen, CavityModel, CavityModelParams};
use topopt::fem::{
    assemble_elasticity, assemble_scalar, lame_parameters, solve, Dirichlet, ElasticityProblem, ScalarDiffusionProblem,
    SolverOptions, Support,
};
use topopt::mesh::{SimplexMesh, DEFAULT_TAG};
use topopt::oracle::label_voids;

use super::{blob_layout, in_boundary_band, layout_chi, unit_square, vertex_contact_components};

pub const MMS_SIZES: [usize; 4] = [8, 16, 32, 64];

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn params() -> CavityModelParams {
    CavityModelParams::new(&[DEFAULT_TAG])
}

pub struct Agreement {
    /// Over all void elements outside the band.
    pub raw_rate: f64,
    /// Over void elements whose component has no corner-only contact.
    pub rate: f64,
    pub total: usize,
    /// Void elements whose component has a corner-only contact.
    pub skipped: usize,
}

/// Share of void elements, outside a two-element boundary band, where
/// `p > 0.5` matches the flood-fill enclosed label. 20 random layouts on a
/// 50×50 grid.
///
/// Corner-only contacts are open to the nodal field but sealed to the face
/// flood fill, so they are counted separately.
pub fn flood_fill_agreement() -> Agreement {
    let mesh = unit_square(50);
    let band = 2.0 / 50.0;
    let (mut agree, mut total, mut skipped, mut skipped_agree) = (0usize, 0usize, 0usize, 0usize);
    for seed in 0..20 {
        let chi = sharpen(&layout_chi(&mesh, &blob_layout(seed)), 0.5);
        let voids = label_voids(&mesh, &chi, 0.5, &[DEFAULT_TAG]).unwrap();
        let contact = vertex_contact_components(&mesh, &voids, &[DEFAULT_TAG]);
        let p = CavityModel::new(&mesh, &chi, &params()).unwrap().solve_state(None).unwrap();
        let pe = mesh.nodal_to_element(&p);
        for e in 0..mesh.num_elements() {
            let Some(c) = voids.labels[e] else { continue };
            if in_boundary_band(&mesh, e, band) {
                continue;
            }
            let hit = (pe[e] > 0.5) == voids.is_enclosed(c);
            if contact[c] {
                skipped += 1;
                skipped_agree += hit as usize;
            } else {
                total += 1;
                agree += hit as usize;
            }
        }
    }
    Agreement {
        raw_rate: (agree + skipped_agree) as f64 / (total + skipped) as f64,
        rate: agree as f64 / total as f64,
        total,
        skipped,
    }
}

/// Largest relative gap between `⟨f, p̂⟩` and `⟨g, p⟩` over 10 random
/// layouts on a 32×32 grid.
pub fn worst_adjoint_gap() -> f64 {
    let mesh = unit_square(32);
    let mut worst = 0.0f64;
    for seed in 100..110 {
        let chi = layout_chi(&mesh, &blob_layout(seed));
        let model = CavityModel::new(&mesh, &chi, &params())
            .unwrap()
            .with_solver(SolverOptions::with_tol(1e-13));
        let p = model.solve_state(None).unwrap();
        let q = model.solve_adjoint(&p, None).unwrap();
        let lhs = dot(model.state_load(), &model.restrict(&q));
        let rhs = dot(&model.adjoint_load(&p), &model.restrict(&p));
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()));
    }
    worst
}

/// Share of the 20 largest `|J′_h|` elements per layout whose sign matches a
/// one-sided χ finite difference of `J_h`. 5 random layouts on 24×24.
pub fn fd_sign_agreement() -> (f64, usize) {
    let mesh = unit_square(24);
    let opts = SolverOptions::with_tol(1e-13);
    let j_h = |chi: &[f64]| {
        let model = CavityModel::new(&mesh, chi, &params()).unwrap().with_solver(opts);
        constraint_value(&mesh, &model.solve_state(None).unwrap())
    };
    let (mut agree, mut total) = (0usize, 0usize);
    for seed in 200..205 {
        let chi = sharpen(&layout_chi(&mesh, &blob_layout(seed)), 0.5);
        let model = CavityModel::new(&mesh, &chi, &params()).unwrap().with_solver(opts);
        let field = model.evaluate(None).unwrap();
        let mut order: Vec<usize> = (0..mesh.num_elements()).collect();
        order.sort_by(|&a, &b| field.derivative[b].abs().total_cmp(&field.derivative[a].abs()));
        let base = j_h(&chi);
        for &e in order.iter().take(20) {
            // Move χ_e inward from whichever bound it sits on.
            let delta = 1e-3;
            let step = if chi[e] >= 0.5 { -delta } else { delta };
            let mut perturbed = chi.clone();
            perturbed[e] += step;
            let slope = (j_h(&perturbed) - base) / step;
            total += 1;
            if slope.signum() == field.derivative[e].signum() {
                agree += 1;
            }
        }
    }
    (agree as f64 / total as f64, total)
}

fn bump(x: [f64; 3]) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).sin()
}

/// Discrete L2 norm of nodal values with the lumped mass.
fn l2(mesh: &SimplexMesh, values: impl Iterator<Item = f64>) -> f64 {
    values.zip(mesh.lumped_mass()).map(|(v, m)| m * v * v).sum::<f64>().sqrt()
}

/// L2 error of `−Δu = 2π² sin πx sin πy` with `u = 0` on the unit square.
pub fn poisson_error(n: usize) -> f64 {
    let mesh = unit_square(n);
    let ne = mesh.num_elements();
    let mut problem = ScalarDiffusionProblem::new(vec![1.0; ne], vec![0.0; ne], vec![0.0; ne])
        .with_dirichlet(Dirichlet::tag(DEFAULT_TAG, 0.0));
    problem.nodal_source = Some(mesh.nodes().iter().map(|&x| 2.0 * PI * PI * bump(x)).collect());
    let u = solve(&assemble_scalar(&mesh, &problem).unwrap(), 1e-12).unwrap();
    l2(&mesh, u.iter().zip(mesh.nodes()).map(|(uh, &x)| uh - bump(x)))
}

/// L2 error of clamped plane strain whose exact displacement has both
/// components equal to `sin πx sin πy`.
pub fn elasticity_error(n: usize) -> f64 {
    let (e_mod, nu) = (1.0, 0.3);
    let mesh = unit_square(n);
    let (lambda, mu) = lame_parameters(e_mod, nu);
    let mut problem = ElasticityProblem::new(e_mod, nu, vec![1.0; mesh.num_elements()]);
    problem.supports.push(Support::clamped(DEFAULT_TAG));
    problem.body_force = Some(
        mesh.nodes()
            .iter()
            .map(|&x| {
                let s = bump(x);
                let cc = (PI * x[0]).cos() * (PI * x[1]).cos();
                let f = (lambda + mu) * PI * PI * (s - cc) + 2.0 * mu * PI * PI * s;
                [f, f, 0.0]
            })
            .collect(),
    );
    let u = solve(&assemble_elasticity(&mesh, &problem).unwrap(), 1e-12).unwrap();
    let exact: Vec<f64> = mesh.nodes().iter().map(|&x| bump(x)).collect();
    let ex = l2(&mesh, (0..mesh.num_nodes()).map(|v| u[2 * v] - exact[v]));
    let ey = l2(&mesh, (0..mesh.num_nodes()).map(|v| u[2 * v + 1] - exact[v]));
    ex.hypot(ey)
}

/// Error ratios between consecutive mesh doublings.
pub fn doubling_ratios(error: impl Fn(usize) -> f64) -> Vec<f64> {
    let errors: Vec<f64> = MMS_SIZES.iter().map(|&n| error(n)).collect();
    errors.windows(2).map(|w| w[0] / w[1]).collect()
}
