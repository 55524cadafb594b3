//! P1 finite elements on [`SimplexMesh`]: assembly of scalar
//! diffusion–reaction and small-strain elasticity systems, and their
//! iterative solution.
//!
//! Dirichlet degrees of freedom are eliminated symmetrically during assembly:
//! the returned [`SparseSystem`] only contains free unknowns, and known values
//! are moved to the right-hand side.

mod elasticity;
mod scalar;
mod solver;
mod sparse;

pub use elasticity::{
    assemble_elasticity, element_strain, lame_parameters, ElasticityProblem, Support, Traction,
};
pub use scalar::{assemble_scalar, BoundaryValue, Dirichlet, DirichletTarget, ScalarDiffusionProblem};
pub use solver::{pcg, solve, solve_with, SolveReport, SolverOptions};
pub use sparse::CsrMatrix;

const FIXED: usize = usize::MAX;

/// Free/prescribed split of the global degrees of freedom.
#[derive(Debug, Clone)]
pub struct DofMap {
    free: Vec<usize>,
    index: Vec<usize>,
    prescribed: Vec<f64>,
}

impl DofMap {
    /// `fixed[i]` is `Some(value)` for prescribed global dof `i`.
    pub fn new(fixed: &[Option<f64>]) -> Self {
        let mut free = Vec::new();
        let mut index = vec![FIXED; fixed.len()];
        let mut prescribed = vec![0.0; fixed.len()];
        for (i, f) in fixed.iter().enumerate() {
            match f {
                Some(v) => prescribed[i] = *v,
                None => {
                    index[i] = free.len();
                    free.push(i);
                }
            }
        }
        DofMap { free, index, prescribed }
    }

    pub fn num_global(&self) -> usize {
        self.index.len()
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    pub fn free_index(&self, global: usize) -> Option<usize> {
        let i = self.index[global];
        (i != FIXED).then_some(i)
    }

    pub fn is_fixed(&self, global: usize) -> bool {
        self.index[global] == FIXED
    }
}

/// Assembled, Dirichlet-reduced linear system.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
}

impl SparseSystem {
    pub fn num_free(&self) -> usize {
        self.dofs.num_free()
    }

    /// Scatters free values into a full vector with prescribed values restored.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut full = self.dofs.prescribed.clone();
        for (k, &g) in self.dofs.free.iter().enumerate() {
            full[g] = free[k];
        }
        full
    }

    /// Gathers the free entries of a full vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.dofs.free.iter().map(|&g| full[g]).collect()
    }
}

/// Accumulates element contributions into triplets and a reduced load.
struct Assembler<'a> {
    dofs: &'a DofMap,
    triplets: Vec<(usize, usize, f64)>,
    rhs: Vec<f64>,
}

impl<'a> Assembler<'a> {
    fn new(dofs: &'a DofMap, capacity: usize) -> Self {
        Assembler {
            dofs,
            triplets: Vec::with_capacity(capacity),
            rhs: vec![0.0; dofs.num_free()],
        }
    }

    /// Adds a dense, row-major `n × n` element matrix on global dofs `gdofs`.
    fn add_matrix(&mut self, gdofs: &[usize], ke: &[f64]) {
        let n = gdofs.len();
        for a in 0..n {
            let Some(i) = self.dofs.free_index(gdofs[a]) else {
                continue;
            };
            for b in 0..n {
                let k = ke[a * n + b];
                match self.dofs.free_index(gdofs[b]) {
                    Some(j) => self.triplets.push((i, j, k)),
                    None => self.rhs[i] -= k * self.dofs.prescribed[gdofs[b]],
                }
            }
        }
    }

    fn add_load(&mut self, gdof: usize, value: f64) {
        if let Some(i) = self.dofs.free_index(gdof) {
            self.rhs[i] += value;
        }
    }

    fn finish(self) -> SparseSystem {
        let n = self.dofs.num_free();
        SparseSystem {
            matrix: CsrMatrix::from_triplets(n, self.triplets),
            rhs: self.rhs,
            dofs: self.dofs.clone(),
        }
    }
}
