use serde::{Deserialize, Serialize};

use super::{Assembler, DofMap, SparseSystem};
use crate::error::{Error, Result};
use crate::mesh::SimplexMesh;

/// Constant traction (force per unit facet measure) on tagged facets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Traction {
    pub tag: String,
    pub vector: [f64; 3],
}

/// Prescribed displacement on the nodes of tagged facets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Support {
    pub tag: String,
    /// Constrained components; empty means all of them.
    #[serde(default)]
    pub components: Vec<usize>,
    #[serde(default)]
    pub value: [f64; 3],
}

impl Support {
    pub fn clamped(tag: &str) -> Self {
        Support {
            tag: tag.to_string(),
            components: Vec::new(),
            value: [0.0; 3],
        }
    }

    pub fn roller(tag: &str, component: usize) -> Self {
        Support {
            tag: tag.to_string(),
            components: vec![component],
            value: [0.0; 3],
        }
    }
}

/// Isotropic linear elasticity; 2D meshes are treated in plane strain.
#[derive(Debug, Clone, PartialEq)]
pub struct ElasticityProblem {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    /// Per-element multiplier on the elastic tensor (χ interpolation).
    pub stiffness_scale: Vec<f64>,
    pub tractions: Vec<Traction>,
    pub supports: Vec<Support>,
    /// Optional nodal body force, integrated with the lumped mass.
    pub body_force: Option<Vec<[f64; 3]>>,
}

impl ElasticityProblem {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64, stiffness_scale: Vec<f64>) -> Self {
        ElasticityProblem {
            youngs_modulus,
            poisson_ratio,
            stiffness_scale,
            tractions: Vec::new(),
            supports: Vec::new(),
            body_force: None,
        }
    }
}

/// `(λ, μ)` for the given Young's modulus and Poisson ratio.
pub fn lame_parameters(e: f64, nu: f64) -> (f64, f64) {
    (e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu)))
}

/// Small-strain tensor on element `e` for the interleaved displacement vector
/// `u` (`u[d * node + component]`). Out-of-plane entries stay zero in 2D.
pub fn element_strain(mesh: &SimplexMesh, e: usize, u: &[f64]) -> [[f64; 3]; 3] {
    let d = mesh.dim();
    let mut grad = [[0.0; 3]; 3];
    for (&v, g) in mesh.element(e).iter().zip(mesh.gradients(e)) {
        for i in 0..d {
            let ui = u[d * v + i];
            for j in 0..d {
                grad[i][j] += ui * g[j];
            }
        }
    }
    let mut eps = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            eps[i][j] = 0.5 * (grad[i][j] + grad[j][i]);
        }
    }
    eps
}

fn validate(mesh: &SimplexMesh, problem: &ElasticityProblem) -> Result<()> {
    let (e, nu) = (problem.youngs_modulus, problem.poisson_ratio);
    if !(e > 0.0) {
        return Err(Error::InvalidCoefficient(format!("Young's modulus {e} must be positive")));
    }
    if !(nu > -1.0 && nu < 0.5) {
        return Err(Error::InvalidCoefficient(format!("Poisson ratio {nu} outside (-1, 0.5)")));
    }
    if problem.stiffness_scale.len() != mesh.num_elements() {
        return Err(Error::InvalidCoefficient("stiffness scale length differs from element count".into()));
    }
    if let Some((k, s)) = problem
        .stiffness_scale
        .iter()
        .enumerate()
        .find(|(_, &s)| !(s > 0.0) || !s.is_finite())
    {
        return Err(Error::InvalidCoefficient(format!("stiffness scale {s} on element {k} must be positive")));
    }
    for t in &problem.tractions {
        if !mesh.has_tag(&t.tag) {
            return Err(Error::Config(format!("traction tag `{}` is not defined on the mesh", t.tag)));
        }
    }
    for s in &problem.supports {
        if !mesh.has_tag(&s.tag) {
            return Err(Error::Config(format!("support tag `{}` is not defined on the mesh", s.tag)));
        }
        if s.components.iter().any(|&c| c >= mesh.dim()) {
            return Err(Error::Config(format!("support `{}` constrains a missing component", s.tag)));
        }
    }
    Ok(())
}

/// Standard P1 stiffness `∫ ε(v) : 𝔻 : ε(u)` with consistent facet tractions.
pub fn assemble_elasticity(mesh: &SimplexMesh, problem: &ElasticityProblem) -> Result<SparseSystem> {
    validate(mesh, problem)?;
    let d = mesh.dim();
    let mut fixed = vec![None; d * mesh.num_nodes()];
    for s in &problem.supports {
        let comps: Vec<usize> = if s.components.is_empty() {
            (0..d).collect()
        } else {
            s.components.clone()
        };
        for v in mesh.tag_nodes(&[&s.tag])? {
            for &c in &comps {
                fixed[d * v + c] = Some(s.value[c]);
            }
        }
    }
    let dofs = DofMap::new(&fixed);

    let (lambda, mu) = lame_parameters(problem.youngs_modulus, problem.poisson_ratio);
    let nv = d + 1;
    let n = nv * d;
    let mut asm = Assembler::new(&dofs, mesh.num_elements() * n * n);
    let mut ke = vec![0.0; n * n];
    let mut gdofs = vec![0usize; n];
    for e in 0..mesh.num_elements() {
        let conn = mesh.element(e);
        let g = mesh.gradients(e);
        let w = mesh.element_volume(e) * problem.stiffness_scale[e];
        for a in 0..nv {
            for i in 0..d {
                gdofs[a * d + i] = d * conn[a] + i;
            }
        }
        for a in 0..nv {
            for b in 0..nv {
                let gab: f64 = (0..d).map(|k| g[a][k] * g[b][k]).sum();
                for i in 0..d {
                    for j in 0..d {
                        let mut k = lambda * g[a][i] * g[b][j] + mu * g[a][j] * g[b][i];
                        if i == j {
                            k += mu * gab;
                        }
                        ke[(a * d + i) * n + b * d + j] = w * k;
                    }
                }
            }
        }
        asm.add_matrix(&gdofs, &ke);
    }

    for t in &problem.tractions {
        for &f in mesh.tag_facets(&t.tag)? {
            let share = mesh.facet_measure(f) / d as f64;
            for &v in mesh.facet(f) {
                for i in 0..d {
                    asm.add_load(d * v + i, t.vector[i] * share);
                }
            }
        }
    }
    if let Some(body) = &problem.body_force {
        for (v, (force, &m)) in body.iter().zip(mesh.lumped_mass()).enumerate() {
            for i in 0..d {
                asm.add_load(d * v + i, force[i] * m);
            }
        }
    }
    Ok(asm.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::solve;
    use crate::mesh::{generate_box_mesh, Axis, BoxSpec, TagRule};

    #[test]
    fn uniaxial_bar_2d() {
        // ν = 0 makes plane strain coincide with the 1D bar.
        let (len, h, t, e) = (4.0, 1.0, 2.5, 7.0);
        let spec = BoxSpec::new_2d([0.0, 0.0], [len, h], [8, 2])
            .with_tag(TagRule::plane("left", Axis::X, 0.0))
            .with_tag(TagRule::plane("right", Axis::X, len))
            .with_tag(TagRule::plane("bottom", Axis::Y, 0.0));
        let mesh = generate_box_mesh(&spec).unwrap();
        let mut p = ElasticityProblem::new(e, 0.0, vec![1.0; mesh.num_elements()]);
        p.supports = vec![Support::roller("left", 0), Support::roller("bottom", 1)];
        p.tractions = vec![Traction {
            tag: "right".into(),
            vector: [t, 0.0, 0.0],
        }];
        let u = solve(&assemble_elasticity(&mesh, &p).unwrap(), 1e-13).unwrap();
        for (v, x) in mesh.nodes().iter().enumerate() {
            assert!((u[2 * v] - t * x[0] / e).abs() < 1e-8);
        }
    }

    #[test]
    fn uniaxial_bar_3d_with_poisson() {
        let (len, t, e, nu) = (3.0, 1.5, 10.0, 0.3);
        let spec = BoxSpec::new_3d([0.0; 3], [len, 1.0, 1.0], [6, 2, 2])
            .with_tag(TagRule::plane("x0", Axis::X, 0.0))
            .with_tag(TagRule::plane("x1", Axis::X, len))
            .with_tag(TagRule::plane("y0", Axis::Y, 0.0))
            .with_tag(TagRule::plane("z0", Axis::Z, 0.0));
        let mesh = generate_box_mesh(&spec).unwrap();
        let mut p = ElasticityProblem::new(e, nu, vec![1.0; mesh.num_elements()]);
        p.supports = vec![Support::roller("x0", 0), Support::roller("y0", 1), Support::roller("z0", 2)];
        p.tractions = vec![Traction {
            tag: "x1".into(),
            vector: [t, 0.0, 0.0],
        }];
        let u = solve(&assemble_elasticity(&mesh, &p).unwrap(), 1e-13).unwrap();
        for (v, x) in mesh.nodes().iter().enumerate() {
            assert!((u[3 * v] - t * x[0] / e).abs() < 1e-8);
            assert!((u[3 * v + 1] + nu * t * x[1] / e).abs() < 1e-8);
        }
        for el in 0..mesh.num_elements() {
            let eps = element_strain(&mesh, el, &u);
            assert!((eps[0][0] - t / e).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_traction_zero_displacement() {
        let spec = BoxSpec::new_2d([0.0, 0.0], [2.0, 1.0], [4, 2]).with_tag(TagRule::plane("left", Axis::X, 0.0));
        let mesh = generate_box_mesh(&spec).unwrap();
        let mut p = ElasticityProblem::new(1.0, 0.3, vec![1.0; mesh.num_elements()]);
        p.supports = vec![Support::clamped("left")];
        let u = solve(&assemble_elasticity(&mesh, &p).unwrap(), 1e-10).unwrap();
        assert!(u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rigid_body_modes_in_kernel() {
        for spec in [
            BoxSpec::new_2d([0.0, 0.0], [1.0, 1.0], [3, 3]),
            BoxSpec::new_3d([0.0; 3], [1.0; 3], [2, 2, 2]),
        ] {
            let mesh = generate_box_mesh(&spec).unwrap();
            let d = mesh.dim();
            let p = ElasticityProblem::new(1.0, 0.3, vec![1.0; mesh.num_elements()]);
            let sys = assemble_elasticity(&mesh, &p).unwrap();
            assert!(sys.matrix.asymmetry() < 1e-12);
            let mut modes = Vec::new();
            for c in 0..d {
                let mut m = vec![0.0; d * mesh.num_nodes()];
                for v in 0..mesh.num_nodes() {
                    m[d * v + c] = 1.0;
                }
                modes.push(m);
            }
            let rotations: &[(usize, usize)] = if d == 2 { &[(0, 1)] } else { &[(0, 1), (1, 2), (0, 2)] };
            for &(a, b) in rotations {
                let mut m = vec![0.0; d * mesh.num_nodes()];
                for (v, x) in mesh.nodes().iter().enumerate() {
                    m[d * v + a] = -x[b];
                    m[d * v + b] = x[a];
                }
                modes.push(m);
            }
            assert_eq!(modes.len(), d * (d + 1) / 2);
            for m in &modes {
                let km = sys.matrix.mul_vec(m);
                assert!(km.iter().all(|x| x.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn invalid_material_rejected() {
        let mesh = generate_box_mesh(&BoxSpec::new_2d([0.0, 0.0], [1.0, 1.0], [2, 2])).unwrap();
        let ne = mesh.num_elements();
        assert!(assemble_elasticity(&mesh, &ElasticityProblem::new(-1.0, 0.3, vec![1.0; ne])).is_err());
        assert!(assemble_elasticity(&mesh, &ElasticityProblem::new(1.0, 0.5, vec![1.0; ne])).is_err());
        assert!(assemble_elasticity(&mesh, &ElasticityProblem::new(1.0, 0.3, vec![0.0; ne])).is_err());
    }
}
