//! The level-set design variable and its reaction–diffusion update.
//!
//! Material is where `φ ≥ 0`. Each update advances
//! `∂φ/∂t = −K (J′ − τ ∇²φ)` by one step that is implicit in the diffusion
//! and explicit in the reaction, with a lumped mass matrix, zero flux on the
//! free boundary and `φ = 1` on material-connected boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble_scalar, pcg, Dirichlet, ScalarDiffusionProblem, SolverOptions, SparseSystem};
use crate::mesh::SimplexMesh;

const EVOLVE_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetField {
    pub phi: Vec<f64>,
}

impl LevelSetField {
    pub fn uniform(mesh: &SimplexMesh, value: f64) -> Self {
        LevelSetField {
            phi: vec![value.clamp(-1.0, 1.0); mesh.num_nodes()],
        }
    }

    pub fn from_values(mut phi: Vec<f64>) -> Self {
        clamp(&mut phi);
        LevelSetField { phi }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// Pointwise characteristic function at the nodes (1 where `φ ≥ 0`).
    pub fn nodal_indicator(&self) -> Vec<f64> {
        self.phi.iter().map(|&p| if p >= 0.0 { 1.0 } else { 0.0 }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionParams {
    /// Regularization weight on the diffusion term.
    pub tau: f64,
    #[serde(default = "one")]
    pub k: f64,
    #[serde(default = "one")]
    pub dt: f64,
    /// Boundary tags connected to material outside the domain (`φ = 1`).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub material_tags: Vec<String>,
}

fn one() -> f64 {
    1.0
}

impl Default for EvolutionParams {
    fn default() -> Self {
        EvolutionParams {
            tau: 1e-4,
            k: 1.0,
            dt: 1.0,
            material_tags: Vec::new(),
        }
    }
}

impl EvolutionParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau", self.tau), ("k", self.k), ("dt", self.dt)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::validation(name, "must be positive"));
            }
        }
        Ok(())
    }
}

/// Element characteristic values: the mean of the nodal 0/1 indicator, so
/// only elements cut by the zero level set take fractional values.
pub fn characteristic(mesh: &SimplexMesh, field: &LevelSetField) -> Vec<f64> {
    mesh.nodal_to_element(&field.nodal_indicator())
}

/// One reaction–diffusion step; see [`Evolver`] for repeated use.
pub fn evolve(
    mesh: &SimplexMesh,
    field: &LevelSetField,
    sensitivity: &[f64],
    params: &EvolutionParams,
) -> Result<LevelSetField> {
    Evolver::new(mesh, params, &[])?.step(field, sensitivity)
}

/// Holds the factor-free system `(M/Δt + Kτ S)` for a fixed mesh and
/// parameter set so repeated steps only solve.
#[derive(Debug, Clone)]
pub struct Evolver<'m> {
    mesh: &'m SimplexMesh,
    params: EvolutionParams,
    system: SparseSystem,
    /// Right-hand side contribution of the `φ = 1` constraints.
    lift: Vec<f64>,
}

impl<'m> Evolver<'m> {
    /// `pinned` nodes are held at `φ = 1` in addition to the material tags.
    pub fn new(mesh: &'m SimplexMesh, params: &EvolutionParams, pinned: &[usize]) -> Result<Self> {
        params.validate()?;
        let ne = mesh.num_elements();
        let mut problem = ScalarDiffusionProblem::new(
            vec![params.k * params.tau; ne],
            vec![1.0 / params.dt; ne],
            vec![0.0; ne],
        );
        for tag in &params.material_tags {
            problem = problem.with_dirichlet(Dirichlet::tag(tag, 1.0));
        }
        if !pinned.is_empty() {
            problem = problem.with_dirichlet(Dirichlet::nodes(pinned.to_vec(), 1.0));
        }
        let system = assemble_scalar(mesh, &problem)?;
        let lift = system.rhs.clone();
        Ok(Evolver {
            mesh,
            params: params.clone(),
            system,
            lift,
        })
    }

    pub fn params(&self) -> &EvolutionParams {
        &self.params
    }

    /// Whether node `v` is held at `φ = 1`.
    pub fn is_pinned(&self, v: usize) -> bool {
        self.system.dofs.is_fixed(v)
    }

    fn solve_nodal(&self, load: &[f64], with_lift: bool, guess: &[f64]) -> Result<Vec<f64>> {
        let mass = self.mesh.lumped_mass();
        let weighted: Vec<f64> = load.iter().zip(mass).map(|(f, m)| f * m).collect();
        let mut rhs = self.system.restrict(&weighted);
        if with_lift {
            for (r, l) in rhs.iter_mut().zip(&self.lift) {
                *r += l;
            }
        }
        let mut x = self.system.restrict(guess);
        pcg(&self.system.matrix, &rhs, &mut x, SolverOptions::with_tol(EVOLVE_TOL))?;
        if with_lift {
            Ok(self.system.expand(&x))
        } else {
            let mut full = vec![0.0; self.mesh.num_nodes()];
            for (g, v) in full.iter_mut().enumerate() {
                if let Some(i) = self.system.dofs.free_index(g) {
                    *v = x[i];
                }
            }
            Ok(full)
        }
    }

    /// Unclamped `φ_new` for the given sensitivity.
    pub fn advance_unclamped(&self, field: &LevelSetField, sensitivity: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(sensitivity.len(), field.len());
        let (k, dt) = (self.params.k, self.params.dt);
        let load: Vec<f64> = field
            .phi
            .iter()
            .zip(sensitivity)
            .map(|(p, s)| p / dt - k * s)
            .collect();
        self.solve_nodal(&load, true, &field.phi)
    }

    /// Change in the unclamped update per unit of an extra sensitivity
    /// `drive`: the step with `J′ + λ·drive` equals
    /// `advance_unclamped(J′) − λ·response(drive)`.
    pub fn response(&self, drive: &[f64]) -> Result<Vec<f64>> {
        let k = self.params.k;
        let load: Vec<f64> = drive.iter().map(|d| k * d).collect();
        self.solve_nodal(&load, false, &vec![0.0; drive.len()])
    }

    pub fn step(&self, field: &LevelSetField, sensitivity: &[f64]) -> Result<LevelSetField> {
        Ok(LevelSetField::from_values(self.advance_unclamped(field, sensitivity)?))
    }
}

pub(crate) fn clamp(phi: &mut [f64]) {
    for p in phi {
        *p = p.clamp(-1.0, 1.0);
    }
}
