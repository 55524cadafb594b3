use super::{Assembler, DofMap, SparseSystem};
use crate::error::{Error, Result};
use crate::mesh::SimplexMesh;

#[derive(Debug, Clone, PartialEq)]
pub enum DirichletTarget {
    /// All nodes on facets carrying the tag.
    Tag(String),
    Nodes(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryValue {
    Constant(f64),
    /// Value per mesh node; only the constrained entries are read.
    Nodal(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dirichlet {
    pub target: DirichletTarget,
    pub value: BoundaryValue,
}

impl Dirichlet {
    pub fn tag(tag: &str, value: f64) -> Self {
        Dirichlet {
            target: DirichletTarget::Tag(tag.to_string()),
            value: BoundaryValue::Constant(value),
        }
    }

    pub fn nodes(nodes: Vec<usize>, value: f64) -> Self {
        Dirichlet {
            target: DirichletTarget::Nodes(nodes),
            value: BoundaryValue::Constant(value),
        }
    }
}

/// `−div(a ∇u) + c u = f` with piecewise-constant `a`, `c`, `f`, zero flux on
/// every boundary not listed in `dirichlet`.
#[derive(Debug, Clone, Default)]
pub struct ScalarDiffusionProblem {
    pub diffusion: Vec<f64>,
    pub reaction: Vec<f64>,
    pub source: Vec<f64>,
    /// Additional P1 source given at nodes.
    pub nodal_source: Option<Vec<f64>>,
    pub dirichlet: Vec<Dirichlet>,
}

impl ScalarDiffusionProblem {
    pub fn new(diffusion: Vec<f64>, reaction: Vec<f64>, source: Vec<f64>) -> Self {
        ScalarDiffusionProblem {
            diffusion,
            reaction,
            source,
            nodal_source: None,
            dirichlet: Vec::new(),
        }
    }

    pub fn with_dirichlet(mut self, bc: Dirichlet) -> Self {
        self.dirichlet.push(bc);
        self
    }
}

pub(crate) fn scalar_dof_map(mesh: &SimplexMesh, dirichlet: &[Dirichlet]) -> Result<DofMap> {
    let mut fixed = vec![None; mesh.num_nodes()];
    for bc in dirichlet {
        let nodes = match &bc.target {
            DirichletTarget::Tag(tag) => {
                if !mesh.has_tag(tag) {
                    return Err(Error::Config(format!("Dirichlet tag `{tag}` is not defined on the mesh")));
                }
                mesh.tag_nodes(&[tag])?
            }
            DirichletTarget::Nodes(nodes) => nodes.clone(),
        };
        for v in nodes {
            if v >= mesh.num_nodes() {
                return Err(Error::Config(format!("Dirichlet node {v} out of range")));
            }
            fixed[v] = Some(match &bc.value {
                BoundaryValue::Constant(c) => *c,
                BoundaryValue::Nodal(values) => values[v],
            });
        }
    }
    Ok(DofMap::new(&fixed))
}

/// Assembles stiffness `Σ a_e ∫∇N·∇N`, reaction `Σ c_e ∫N N` (row-sum
/// lumped) and load `Σ f_e ∫N`.
pub fn assemble_scalar(mesh: &SimplexMesh, problem: &ScalarDiffusionProblem) -> Result<SparseSystem> {
    let ne = mesh.num_elements();
    for (name, v) in [
        ("diffusion", &problem.diffusion),
        ("reaction", &problem.reaction),
        ("source", &problem.source),
    ] {
        if v.len() != ne {
            return Err(Error::InvalidCoefficient(format!(
                "{name} has {} values for {ne} elements",
                v.len()
            )));
        }
    }
    if let Some((e, a)) = problem.diffusion.iter().enumerate().find(|(_, &a)| !(a > 0.0) || !a.is_finite()) {
        return Err(Error::InvalidCoefficient(format!("diffusion {a} on element {e} must be positive")));
    }
    if let Some(ns) = &problem.nodal_source {
        if ns.len() != mesh.num_nodes() {
            return Err(Error::InvalidCoefficient("nodal source length differs from node count".into()));
        }
    }

    let dofs = scalar_dof_map(mesh, &problem.dirichlet)?;
    let nv = mesh.nodes_per_element();
    let mut asm = Assembler::new(&dofs, ne * nv * nv);
    let mut ke = vec![0.0; nv * nv];
    for e in 0..ne {
        let conn = mesh.element(e);
        let grads = mesh.gradients(e);
        let vol = mesh.element_volume(e);
        let a = problem.diffusion[e] * vol;
        let lumped = problem.reaction[e] * vol / nv as f64;
        for i in 0..nv {
            for j in 0..nv {
                let gij = grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1] + grads[i][2] * grads[j][2];
                ke[i * nv + j] = a * gij + if i == j { lumped } else { 0.0 };
            }
        }
        asm.add_matrix(conn, &ke);
        let load = problem.source[e] * vol / nv as f64;
        if load != 0.0 {
            for &v in conn {
                asm.add_load(v, load);
            }
        }
    }
    if let Some(ns) = &problem.nodal_source {
        for (v, (&f, &m)) in ns.iter().zip(mesh.lumped_mass()).enumerate() {
            asm.add_load(v, f * m);
        }
    }
    Ok(asm.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::solve;
    use crate::mesh::{generate_box_mesh, Axis, BoxSpec, TagRule};

    fn strip(n: usize) -> SimplexMesh {
        let spec = BoxSpec::new_2d([0.0, 0.0], [1.0, 1.0 / n as f64], [n, 1])
            .with_tag(TagRule::plane("left", Axis::X, 0.0))
            .with_tag(TagRule::plane("right", Axis::X, 1.0));
        generate_box_mesh(&spec).unwrap()
    }

    #[test]
    fn strip_matches_parabola() {
        // -u'' = 1 on (0,1), u(0) = u(1) = 0  =>  u = x(1-x)/2
        let mesh = strip(16);
        let ne = mesh.num_elements();
        let problem = ScalarDiffusionProblem::new(vec![1.0; ne], vec![0.0; ne], vec![1.0; ne])
            .with_dirichlet(Dirichlet::tag("left", 0.0))
            .with_dirichlet(Dirichlet::tag("right", 0.0));
        let u = solve(&assemble_scalar(&mesh, &problem).unwrap(), 1e-12).unwrap();
        for (i, x) in mesh.nodes().iter().enumerate() {
            let exact = x[0] * (1.0 - x[0]) / 2.0;
            if exact > 1e-3 {
                assert!(((u[i] - exact) / exact).abs() < 0.05, "x={} u={} exact={}", x[0], u[i], exact);
            }
        }
    }

    #[test]
    fn diffusion_dominated_limit_goes_to_dirichlet_value() {
        // c = 1, f = 1 drives u towards 1; huge diffusion pins it to the boundary value 0.
        let mesh = strip(8);
        let ne = mesh.num_elements();
        let problem = ScalarDiffusionProblem::new(vec![1e8; ne], vec![1.0; ne], vec![1.0; ne])
            .with_dirichlet(Dirichlet::tag("left", 0.0));
        let u = solve(&assemble_scalar(&mesh, &problem).unwrap(), 1e-12).unwrap();
        assert!(u.iter().all(|&v| v.abs() < 1e-6));
    }

    #[test]
    fn zero_data_gives_zero() {
        let mesh = strip(4);
        let ne = mesh.num_elements();
        let problem = ScalarDiffusionProblem::new(vec![1.0; ne], vec![0.0; ne], vec![0.0; ne])
            .with_dirichlet(Dirichlet::tag("left", 0.0));
        let u = solve(&assemble_scalar(&mesh, &problem).unwrap(), 1e-10).unwrap();
        assert!(u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_tag_is_configuration_error() {
        let mesh = strip(4);
        let ne = mesh.num_elements();
        let problem = ScalarDiffusionProblem::new(vec![1.0; ne], vec![0.0; ne], vec![0.0; ne])
            .with_dirichlet(Dirichlet::tag("nowhere", 0.0));
        assert!(matches!(assemble_scalar(&mesh, &problem), Err(Error::Config(_))));
    }

    #[test]
    fn nonpositive_diffusion_rejected() {
        let mesh = strip(4);
        let ne = mesh.num_elements();
        let mut a = vec![1.0; ne];
        a[3] = 0.0;
        let problem = ScalarDiffusionProblem::new(a, vec![0.0; ne], vec![0.0; ne]);
        assert!(matches!(assemble_scalar(&mesh, &problem), Err(Error::InvalidCoefficient(_))));
    }

    #[test]
    fn row_sums_equal_reaction_mass() {
        let mesh = generate_box_mesh(&BoxSpec::new_3d([0.0; 3], [1.0; 3], [2, 2, 2])).unwrap();
        let ne = mesh.num_elements();
        let reaction: Vec<f64> = (0..ne).map(|e| 0.5 + (e % 3) as f64).collect();
        let problem = ScalarDiffusionProblem::new(vec![3.0; ne], reaction.clone(), vec![0.0; ne]);
        let sys = assemble_scalar(&mesh, &problem).unwrap();
        let mut expected = vec![0.0; mesh.num_nodes()];
        for e in 0..ne {
            for &v in mesh.element(e) {
                expected[v] += reaction[e] * mesh.element_volume(e) / 4.0;
            }
        }
        let sums = sys.matrix.mul_vec(&vec![1.0; mesh.num_nodes()]);
        for (s, x) in sums.iter().zip(&expected) {
            assert!((s - x).abs() < 1e-12);
        }
        assert!(sys.matrix.asymmetry() < 1e-14);
    }

    #[test]
    fn harmonic_xy_reproduced_closely() {
        let spec = BoxSpec::new_2d([0.0, 0.0], [1.0, 1.0], [16, 16]);
        let mesh = generate_box_mesh(&spec).unwrap();
        let ne = mesh.num_elements();
        let exact: Vec<f64> = mesh.nodes().iter().map(|x| x[0] * x[1]).collect();
        let mut problem = ScalarDiffusionProblem::new(vec![1.0; ne], vec![0.0; ne], vec![0.0; ne]);
        problem.dirichlet.push(Dirichlet {
            target: DirichletTarget::Tag("default".into()),
            value: BoundaryValue::Nodal(exact.clone()),
        });
        let u = solve(&assemble_scalar(&mesh, &problem).unwrap(), 1e-12).unwrap();
        let err = u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-2, "max error {err}");
    }
}
