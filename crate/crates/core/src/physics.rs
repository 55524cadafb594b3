//! The two design objectives: mean compliance of a linear elastic body and
//! thermal compliance under internal heat generation, with their
//! topological derivatives.
//!
//! Both problems are self-adjoint. The derivatives are returned as the
//! nonnegative quadratic forms `ε : 𝔸 χ : ε` and `(2/3) κ |∇u|²`; descent
//! on the objective means moving against them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    assemble_elasticity, assemble_scalar, element_strain, solve_with, Dirichlet, ElasticityProblem,
    ScalarDiffusionProblem, SolverOptions, Support, Traction,
};
use crate::mesh::SimplexMesh;

pub const DEFAULT_ERSATZ: f64 = 1e-3;
pub const PHYSICS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplianceCase {
    #[serde(default = "default_youngs")]
    pub youngs_modulus: f64,
    #[serde(default = "default_poisson")]
    pub poisson_ratio: f64,
    /// Relative stiffness left in void elements.
    #[serde(default = "default_ersatz")]
    pub ersatz: f64,
    #[serde(default)]
    pub tractions: Vec<Traction>,
    #[serde(default)]
    pub supports: Vec<Support>,
}

fn default_youngs() -> f64 {
    1.0
}

fn default_poisson() -> f64 {
    0.3
}

fn default_ersatz() -> f64 {
    DEFAULT_ERSATZ
}

impl ComplianceCase {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64) -> Self {
        ComplianceCase {
            youngs_modulus,
            poisson_ratio,
            ersatz: DEFAULT_ERSATZ,
            tractions: Vec::new(),
            supports: Vec::new(),
        }
    }

    pub fn with_traction(mut self, tag: &str, vector: [f64; 3]) -> Self {
        self.tractions.push(Traction {
            tag: tag.to_string(),
            vector,
        });
        self
    }

    pub fn with_support(mut self, support: Support) -> Self {
        self.supports.push(support);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.youngs_modulus > 0.0) {
            return Err(Error::validation("youngs_modulus", "must be positive"));
        }
        if !(self.poisson_ratio > -1.0 && self.poisson_ratio < 0.5) {
            return Err(Error::validation("poisson_ratio", "must lie in (-1, 0.5)"));
        }
        if !(self.ersatz > 0.0 && self.ersatz < 1.0) {
            return Err(Error::validation("ersatz", "must lie in (0, 1)"));
        }
        if self.supports.is_empty() {
            return Err(Error::validation("supports", "must name at least one boundary tag"));
        }
        Ok(())
    }

    fn problem(&self, chi: &[f64]) -> ElasticityProblem {
        let scale = chi.iter().map(|&c| self.ersatz + (1.0 - self.ersatz) * c).collect();
        let mut problem = ElasticityProblem::new(self.youngs_modulus, self.poisson_ratio, scale);
        problem.tractions = self.tractions.clone();
        problem.supports = self.supports.clone();
        problem
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalCase {
    #[serde(default = "default_kappa_material")]
    pub conductivity_material: f64,
    #[serde(default = "default_kappa_void")]
    pub conductivity_void: f64,
    /// Volumetric heat source over the whole design domain.
    #[serde(default = "default_heat")]
    pub heat_source: f64,
    /// Boundary tags held at zero temperature.
    pub temperature_tags: Vec<String>,
}

fn default_kappa_material() -> f64 {
    26.0
}

fn default_kappa_void() -> f64 {
    2.23e-2
}

fn default_heat() -> f64 {
    1.0
}

impl ThermalCase {
    pub fn new(temperature_tags: &[&str]) -> Self {
        ThermalCase {
            conductivity_material: default_kappa_material(),
            conductivity_void: default_kappa_void(),
            heat_source: default_heat(),
            temperature_tags: temperature_tags.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.conductivity_void > 0.0) {
            return Err(Error::validation("conductivity_void", "must be positive"));
        }
        if !(self.conductivity_material > self.conductivity_void) {
            return Err(Error::validation("conductivity_material", "must exceed conductivity_void"));
        }
        if !(self.heat_source >= 0.0) {
            return Err(Error::validation("heat_source", "must be nonnegative"));
        }
        if self.temperature_tags.is_empty() {
            return Err(Error::validation("temperature_tags", "must name at least one boundary tag"));
        }
        Ok(())
    }

    /// Interpolated conductivity of an element.
    pub fn conductivity(&self, chi: f64) -> f64 {
        self.conductivity_void + (self.conductivity_material - self.conductivity_void) * chi
    }
}

#[derive(Debug, Clone)]
pub struct PhysicsSolution {
    /// Displacement (interleaved per node) or temperature.
    pub state: Vec<f64>,
    pub objective: f64,
}

pub fn solve_compliance(mesh: &SimplexMesh, chi: &[f64], case: &ComplianceCase) -> Result<PhysicsSolution> {
    solve_compliance_from(mesh, chi, case, None, SolverOptions::with_tol(PHYSICS_TOL))
}

/// [`solve_compliance`] with a warm start and explicit solver settings.
pub fn solve_compliance_from(
    mesh: &SimplexMesh,
    chi: &[f64],
    case: &ComplianceCase,
    guess: Option<&[f64]>,
    opts: SolverOptions,
) -> Result<PhysicsSolution> {
    let system = assemble_elasticity(mesh, &case.problem(chi))?;
    let (u, _) = solve_with(&system, opts, guess).map_err(|e| with_context(e, "elasticity"))?;
    let d = mesh.dim();
    let mut objective = 0.0;
    for t in &case.tractions {
        for &f in mesh.tag_facets(&t.tag)? {
            let share = mesh.facet_measure(f) / d as f64;
            for &v in mesh.facet(f) {
                objective += share * (0..d).map(|i| t.vector[i] * u[d * v + i]).sum::<f64>();
            }
        }
    }
    Ok(PhysicsSolution { state: u, objective })
}

/// Contracts `ε : 𝔸 : ε` for the isotropic inclusion tensor.
pub fn inclusion_energy(eps: &[[f64; 3]; 3], youngs_modulus: f64, poisson_ratio: f64) -> f64 {
    let (e, nu) = (youngs_modulus, poisson_ratio);
    let pre = 3.0 * (1.0 - nu) / (2.0 * (1.0 + nu) * (7.0 - 5.0 * nu));
    let c1 = (1.0 - 14.0 * nu + 15.0 * nu * nu) * e / (1.0 - 2.0 * nu).powi(2);
    let trace = eps[0][0] + eps[1][1] + eps[2][2];
    let contraction: f64 = eps.iter().flatten().map(|x| x * x).sum();
    pre * (-c1 * trace * trace + 10.0 * e * contraction)
}

/// Per-element `J′_u = χ_e ε(u) : 𝔸 : ε(u)`; 2D strains are embedded with
/// `ε_zz = 0`.
pub fn compliance_topological_derivative(
    mesh: &SimplexMesh,
    u: &[f64],
    chi: &[f64],
    case: &ComplianceCase,
) -> Vec<f64> {
    (0..mesh.num_elements())
        .map(|e| {
            let eps = element_strain(mesh, e, u);
            chi[e] * inclusion_energy(&eps, case.youngs_modulus, case.poisson_ratio)
        })
        .collect()
}

pub fn solve_thermal(mesh: &SimplexMesh, chi: &[f64], case: &ThermalCase) -> Result<PhysicsSolution> {
    solve_thermal_from(mesh, chi, case, None, SolverOptions::with_tol(PHYSICS_TOL))
}

pub fn solve_thermal_from(
    mesh: &SimplexMesh,
    chi: &[f64],
    case: &ThermalCase,
    guess: Option<&[f64]>,
    opts: SolverOptions,
) -> Result<PhysicsSolution> {
    let ne = mesh.num_elements();
    let kappa = chi.iter().map(|&c| case.conductivity(c)).collect();
    let mut problem = ScalarDiffusionProblem::new(kappa, vec![0.0; ne], vec![case.heat_source; ne]);
    for tag in &case.temperature_tags {
        problem = problem.with_dirichlet(Dirichlet::tag(tag, 0.0));
    }
    let system = assemble_scalar(mesh, &problem)?;
    let (u, _) = solve_with(&system, opts, guess).map_err(|e| with_context(e, "heat conduction"))?;
    let objective = case.heat_source * crate::mesh::integrate_nodal(mesh, &u);
    Ok(PhysicsSolution { state: u, objective })
}

/// Per-element `J′_t = χ_e (2/3) κ |∇u|²` with the material conductivity.
pub fn thermal_topological_derivative(mesh: &SimplexMesh, u: &[f64], chi: &[f64], case: &ThermalCase) -> Vec<f64> {
    (0..mesh.num_elements())
        .map(|e| {
            let g = mesh.element_gradient(e, u);
            chi[e] * 2.0 / 3.0 * case.conductivity_material * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2])
        })
        .collect()
}

fn with_context(err: Error, what: &str) -> Error {
    match err {
        Error::SolverFailure {
            iterations,
            residual,
            context,
        } => Error::SolverFailure {
            iterations,
            residual,
            context: format!(" in {what}{context}"),
        },
        other => other,
    }
}
