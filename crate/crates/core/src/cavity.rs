//! Fictitious-field model of the "no enclosed cavities" constraint.
//!
//! The field `p` solves a steady diffusion problem with a unit-seeking source
//! in the void,
//!
//! ```text
//! −div(a_p ∇p) + (1 − χ)(p − 1) = 0   in D
//!                              p = 0   on Γ_p
//!                        ∇p · n = 0   elsewhere on ∂D
//! a_p = {(ā_p − ε_p)(1 − χ) + ε_p} L²
//! ```
//!
//! Void connected to the powder exit `Γ_p` drains to `p ≈ 0`; void sealed off
//! by material is nearly adiabatic and saturates at `p ≈ 1`. The constraint
//! functional is `J_h = ∫ max(p, 0)`, its adjoint solves the same operator
//! with source `−H(p)`, and the topological derivative combines both.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    assemble_scalar, pcg, solve_with, Dirichlet, ScalarDiffusionProblem, SolverOptions, SparseSystem,
};
use crate::mesh::SimplexMesh;

/// Threshold of the discrete Heaviside in the adjoint source.
pub const HEAVISIDE_TOL: f64 = 1e-9;

/// Default solver tolerance for the fictitious state and adjoint.
pub const FICTITIOUS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityModelParams {
    /// Diffusion coefficient in the void, `ā_p`.
    #[serde(default = "default_a_p")]
    pub a_p: f64,
    /// Diffusion coefficient in the material, `ε_p`.
    #[serde(default = "default_epsilon_p")]
    pub epsilon_p: f64,
    /// Characteristic length `L`.
    #[serde(default = "default_length")]
    pub char_length: f64,
    /// Boundary tags forming the powder exit `Γ_p`.
    #[serde(default = "default_exit_tags")]
    pub exit_tags: Vec<String>,
}

fn default_exit_tags() -> Vec<String> {
    vec![crate::mesh::DEFAULT_TAG.to_string()]
}

fn default_a_p() -> f64 {
    1e2
}

fn default_epsilon_p() -> f64 {
    1e-5
}

fn default_length() -> f64 {
    1.0
}

impl CavityModelParams {
    pub fn new(exit_tags: &[&str]) -> Self {
        CavityModelParams {
            a_p: default_a_p(),
            epsilon_p: default_epsilon_p(),
            char_length: default_length(),
            exit_tags: exit_tags.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn with_coefficients(mut self, a_p: f64, epsilon_p: f64) -> Self {
        self.a_p = a_p;
        self.epsilon_p = epsilon_p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_p > 0.0) {
            return Err(Error::validation("epsilon_p", "must be positive"));
        }
        if !(self.a_p > self.epsilon_p) || !self.a_p.is_finite() {
            return Err(Error::validation("a_p", "must exceed epsilon_p"));
        }
        if !(self.char_length > 0.0) || !self.char_length.is_finite() {
            return Err(Error::validation("char_length", "must be positive"));
        }
        if self.exit_tags.is_empty() {
            return Err(Error::validation("exit_tags", "must name at least one boundary tag"));
        }
        Ok(())
    }
}

/// Element indicator fed to the fictitious model: 1 where `χ_e ≥ threshold`.
///
/// With fractional `χ` a wall one node thick is made of cut elements whose
/// diffusion coefficient is a sizeable fraction of `ā_p`, so the field leaks
/// through walls the void oracle treats as closed. Using the oracle's own
/// classification keeps the two consistent.
pub fn sharpen(chi: &[f64], threshold: f64) -> Vec<f64> {
    chi.iter().map(|&c| if c >= threshold { 1.0 } else { 0.0 }).collect()
}

/// `a_p(χ) = {(ā_p − ε_p)(1 − χ) + ε_p} L²`.
pub fn diffusion_coefficient(chi: f64, params: &CavityModelParams) -> f64 {
    ((params.a_p - params.epsilon_p) * (1.0 - chi) + params.epsilon_p) * params.char_length.powi(2)
}

/// Coefficient `A_p(χ)` multiplying `∇p · ∇p̂` in the topological derivative.
pub fn topological_coefficient(chi: f64, dim: usize, params: &CavityModelParams) -> f64 {
    let (a, eps) = (params.a_p, params.epsilon_p);
    let l2 = params.char_length.powi(2);
    let (void, material) = match dim {
        2 => (2.0 * a * (eps - a) / (a + eps), 2.0 * eps * (a - eps) / (eps + a)),
        3 => (3.0 * a * (eps - a) / (2.0 * a + eps), 3.0 * eps * (a - eps) / (2.0 * eps + a)),
        _ => panic!("unsupported dimension {dim}"),
    };
    void * l2 * (1.0 - chi) - material * l2 * chi
}

/// State, adjoint and sensitivity of the cavity model for one design.
#[derive(Debug, Clone)]
pub struct FictitiousField {
    pub p: Vec<f64>,
    pub p_adj: Vec<f64>,
    /// `J_h = ∫_D max(p, 0)`.
    pub constraint: f64,
    /// Per-element topological derivative `J′_h`.
    pub derivative: Vec<f64>,
}

/// The fictitious operator assembled for one element χ field; the state and
/// adjoint share its matrix.
pub struct CavityModel<'m> {
    mesh: &'m SimplexMesh,
    chi: Vec<f64>,
    params: CavityModelParams,
    system: SparseSystem,
    opts: SolverOptions,
}

impl<'m> CavityModel<'m> {
    pub fn new(mesh: &'m SimplexMesh, chi: &[f64], params: &CavityModelParams) -> Result<Self> {
        params.validate()?;
        if chi.len() != mesh.num_elements() {
            return Err(Error::InvalidCoefficient("χ length differs from element count".into()));
        }
        for tag in &params.exit_tags {
            if !mesh.has_tag(tag) {
                return Err(Error::Config(format!("powder exit tag `{tag}` is not defined on the mesh")));
            }
        }
        let mut problem = ScalarDiffusionProblem::new(
            chi.iter().map(|&c| diffusion_coefficient(c, params)).collect(),
            chi.iter().map(|&c| 1.0 - c).collect(),
            chi.iter().map(|&c| 1.0 - c).collect(),
        );
        for tag in &params.exit_tags {
            problem = problem.with_dirichlet(Dirichlet::tag(tag, 0.0));
        }
        let system = assemble_scalar(mesh, &problem)?;
        Ok(CavityModel {
            mesh,
            chi: chi.to_vec(),
            params: params.clone(),
            system,
            opts: SolverOptions::with_tol(FICTITIOUS_TOL),
        })
    }

    pub fn with_solver(mut self, opts: SolverOptions) -> Self {
        self.opts = opts;
        self
    }

    /// Reduced state load vector `∫ (1 − χ) N_i` on the free nodes.
    pub fn state_load(&self) -> &[f64] {
        &self.system.rhs
    }

    /// Reduced adjoint load vector `−∫ H(p) N_i` on the free nodes (lumped).
    pub fn adjoint_load(&self, p: &[f64]) -> Vec<f64> {
        let load: Vec<f64> = self
            .mesh
            .lumped_mass()
            .iter()
            .zip(p)
            .map(|(m, &pi)| if pi >= HEAVISIDE_TOL { -m } else { 0.0 })
            .collect();
        self.system.restrict(&load)
    }

    /// Restriction of a nodal field to the free nodes.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.system.restrict(full)
    }

    pub fn solve_state(&self, guess: Option<&[f64]>) -> Result<Vec<f64>> {
        solve_with(&self.system, self.opts, guess).map(|(p, _)| p)
    }

    pub fn solve_adjoint(&self, p: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>> {
        let rhs = self.adjoint_load(p);
        let mut x = match guess {
            Some(g) => self.system.restrict(g),
            None => vec![0.0; self.system.num_free()],
        };
        pcg(&self.system.matrix, &rhs, &mut x, self.opts)?;
        Ok(self.system.expand(&x))
    }

    pub fn topological_derivative(&self, p: &[f64], p_adj: &[f64]) -> Vec<f64> {
        topological_derivative(self.mesh, &self.chi, p, p_adj, &self.params)
    }

    /// Runs state, adjoint and sensitivity in sequence.
    pub fn evaluate(&self, guess: Option<(&[f64], &[f64])>) -> Result<FictitiousField> {
        let p = self.solve_state(guess.map(|g| g.0))?;
        let p_adj = self.solve_adjoint(&p, guess.map(|g| g.1))?;
        let derivative = self.topological_derivative(&p, &p_adj);
        Ok(FictitiousField {
            constraint: constraint_value(self.mesh, &p),
            p,
            p_adj,
            derivative,
        })
    }
}

/// Solves for the fictitious field `p`.
pub fn solve_fictitious(mesh: &SimplexMesh, chi: &[f64], params: &CavityModelParams) -> Result<Vec<f64>> {
    CavityModel::new(mesh, chi, params)?.solve_state(None)
}

/// `J_h = ∫_D R(p)` with the ramp `R(p) = max(p, 0)` applied at the nodes.
pub fn constraint_value(mesh: &SimplexMesh, p: &[f64]) -> f64 {
    mesh.lumped_mass().iter().zip(p).map(|(m, &v)| m * v.max(0.0)).sum()
}

/// Solves `−div(a_p ∇p̂) + (1 − χ) p̂ = −H(p)`, `p̂ = 0` on `Γ_p`.
pub fn solve_adjoint(mesh: &SimplexMesh, chi: &[f64], p: &[f64], params: &CavityModelParams) -> Result<Vec<f64>> {
    CavityModel::new(mesh, chi, params)?.solve_adjoint(p, None)
}

/// Per-element `J′_h = A_p(χ) ∇p·∇p̂ − (1 − χ)(p − 1) p̂`, the second term
/// averaged over the element with exact P1 quadrature.
///
/// Positive values favour removing material (or keeping void).
pub fn topological_derivative(
    mesh: &SimplexMesh,
    chi: &[f64],
    p: &[f64],
    p_adj: &[f64],
    params: &CavityModelParams,
) -> Vec<f64> {
    let d = mesh.dim();
    let nv = d + 1;
    let denom = (nv * (nv + 1)) as f64;
    (0..mesh.num_elements())
        .map(|e| {
            let gp = mesh.element_gradient(e, p);
            let gq = mesh.element_gradient(e, p_adj);
            let first = topological_coefficient(chi[e], d, params) * (gp[0] * gq[0] + gp[1] * gq[1] + gp[2] * gq[2]);
            let conn = mesh.element(e);
            let (mut sum_uv, mut sum_u, mut sum_v) = (0.0, 0.0, 0.0);
            for &v in conn {
                let u = p[v] - 1.0;
                sum_uv += u * p_adj[v];
                sum_u += u;
                sum_v += p_adj[v];
            }
            let mean_product = (sum_uv + sum_u * sum_v) / denom;
            first - (1.0 - chi[e]) * mean_product
        })
        .collect()
}

/// Evaluates state, adjoint, `J_h` and `J′_h` for one design.
pub fn evaluate(mesh: &SimplexMesh, chi: &[f64], params: &CavityModelParams) -> Result<FictitiousField> {
    CavityModel::new(mesh, chi, params)?.evaluate(None)
}
