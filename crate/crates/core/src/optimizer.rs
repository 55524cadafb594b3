//! Level-set optimization loop with a volume constraint and, optionally, the
//! fictitious-field cavity constraint.
//!
//! Each iteration solves the physics and the fictitious field for the
//! current design, records a history row, checks convergence, then solves
//! the cavity adjoint, assembles the combined sensitivity and advances `φ`.
//! The volume multiplier is chosen by bisection so the updated design meets
//! the per-iteration volume target; the cavity multiplier follows an
//! augmented-Lagrangian update.

use serde::{Deserialize, Serialize};

use crate::cavity::{sharpen, CavityModel, CavityModelParams};
use crate::error::{Error, Result};
use crate::fem::SolverOptions;
use crate::levelset::{characteristic, EvolutionParams, Evolver, LevelSetField};
use crate::mesh::SimplexMesh;
use crate::oracle::{label_voids, VoidComponents, DEFAULT_VOID_THRESHOLD};
use crate::physics::{
    compliance_topological_derivative, solve_compliance_from, solve_thermal_from, thermal_topological_derivative,
    ComplianceCase, ThermalCase, PHYSICS_TOL,
};

/// Largest per-iteration change of `φ` still counted as a fixed point.
const FIXED_POINT_TOL: f64 = 1e-12;
const BISECTION_STEPS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Objective {
    Compliance(ComplianceCase),
    Thermal(ThermalCase),
}

impl Objective {
    pub fn validate(&self) -> Result<()> {
        match self {
            Objective::Compliance(c) => c.validate(),
            Objective::Thermal(t) => t.validate(),
        }
    }

    fn solve(&self, mesh: &SimplexMesh, chi: &[f64], guess: Option<&[f64]>) -> Result<(Vec<f64>, f64)> {
        let opts = SolverOptions::with_tol(PHYSICS_TOL);
        let sol = match self {
            Objective::Compliance(c) => solve_compliance_from(mesh, chi, c, guess, opts)?,
            Objective::Thermal(t) => solve_thermal_from(mesh, chi, t, guess, opts)?,
        };
        Ok((sol.state, sol.objective))
    }

    fn derivative(&self, mesh: &SimplexMesh, state: &[f64], chi: &[f64]) -> Vec<f64> {
        match self {
            Objective::Compliance(c) => compliance_topological_derivative(mesh, state, chi, c),
            Objective::Thermal(t) => thermal_topological_derivative(mesh, state, chi, t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopCriteria {
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Number of trailing history rows compared for objective stagnation.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Relative spread `(max − min)/|mean|` of the objective over the window.
    #[serde(default = "default_objective_tol")]
    pub objective_tol: f64,
    /// Allowed volume excess relative to the volume limit.
    #[serde(default = "default_volume_tol")]
    pub volume_tol: f64,
    /// Allowed `J_h / |D|`.
    #[serde(default = "default_cavity_tol")]
    pub cavity_tol: f64,
}

fn default_max_iterations() -> usize {
    200
}

fn default_window() -> usize {
    5
}

fn default_objective_tol() -> f64 {
    1e-3
}

fn default_volume_tol() -> f64 {
    1e-2
}

fn default_cavity_tol() -> f64 {
    1e-2
}

impl Default for StopCriteria {
    fn default() -> Self {
        StopCriteria {
            max_iterations: default_max_iterations(),
            window: default_window(),
            objective_tol: default_objective_tol(),
            volume_tol: default_volume_tol(),
            cavity_tol: default_cavity_tol(),
        }
    }
}

impl StopCriteria {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::validation("window", "must be positive"));
        }
        for (name, v) in [
            ("objective_tol", self.objective_tol),
            ("volume_tol", self.volume_tol),
            ("cavity_tol", self.cavity_tol),
        ] {
            if !(v > 0.0) {
                return Err(Error::validation(name, "must be positive"));
            }
        }
        Ok(())
    }
}

/// Multiplier update rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateRules {
    /// Upper bound on the relative volume reduction per iteration.
    #[serde(default = "default_volume_step")]
    pub volume_step: f64,
    /// Penalty `ρ` of the cavity multiplier update.
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_lambda_h_max")]
    pub lambda_h_max: f64,
    /// Factor applied to the time step whenever the objective rises after
    /// the volume target is met; 1 keeps the step fixed.
    #[serde(default = "default_step_decay")]
    pub step_decay: f64,
    /// Smallest time step as a fraction of the configured one.
    #[serde(default = "default_min_step_ratio")]
    pub min_step_ratio: f64,
}

fn default_volume_step() -> f64 {
    0.02
}

fn default_rho() -> f64 {
    10.0
}

fn default_lambda_h_max() -> f64 {
    1e3
}

fn default_step_decay() -> f64 {
    0.7
}

fn default_min_step_ratio() -> f64 {
    1e-2
}

impl Default for UpdateRules {
    fn default() -> Self {
        UpdateRules {
            volume_step: default_volume_step(),
            rho: default_rho(),
            lambda_h_max: default_lambda_h_max(),
            step_decay: default_step_decay(),
            min_step_ratio: default_min_step_ratio(),
        }
    }
}

impl UpdateRules {
    pub fn validate(&self) -> Result<()> {
        if !(self.volume_step > 0.0 && self.volume_step < 1.0) {
            return Err(Error::validation("volume_step", "must lie in (0, 1)"));
        }
        if !(self.rho >= 0.0) {
            return Err(Error::validation("rho", "must be nonnegative"));
        }
        if !(self.lambda_h_max >= 0.0) {
            return Err(Error::validation("lambda_h_max", "must be nonnegative"));
        }
        if !(self.step_decay > 0.0 && self.step_decay <= 1.0) {
            return Err(Error::validation("step_decay", "must lie in (0, 1]"));
        }
        if !(self.min_step_ratio > 0.0 && self.min_step_ratio <= 1.0) {
            return Err(Error::validation("min_step_ratio", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Everything [`run`] needs besides the stop criteria.
#[derive(Debug, Clone)]
pub struct OptimizationProblem<'m> {
    pub mesh: &'m SimplexMesh,
    pub objective: Objective,
    pub cavity: CavityModelParams,
    /// When false the fictitious field is still solved and reported but
    /// does not influence the design.
    pub enforce_cavity: bool,
    pub evolution: EvolutionParams,
    pub rules: UpdateRules,
    /// Volume limit as a fraction of `|D|`.
    pub volume_fraction: f64,
    /// Elements kept as material throughout.
    pub non_design: Vec<bool>,
    /// Element `χ` below which an element counts as void, both for the
    /// fictitious model and for the oracle.
    pub void_threshold: f64,
    pub initial: LevelSetField,
}

impl<'m> OptimizationProblem<'m> {
    pub fn new(mesh: &'m SimplexMesh, objective: Objective, cavity: CavityModelParams, volume_fraction: f64) -> Self {
        OptimizationProblem {
            mesh,
            objective,
            cavity,
            enforce_cavity: true,
            evolution: EvolutionParams::default(),
            rules: UpdateRules::default(),
            volume_fraction,
            non_design: vec![false; mesh.num_elements()],
            void_threshold: DEFAULT_VOID_THRESHOLD,
            initial: LevelSetField::uniform(mesh, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        self.cavity.validate()?;
        self.evolution.validate()?;
        self.rules.validate()?;
        if !(self.volume_fraction > 0.0 && self.volume_fraction <= 1.0) {
            return Err(Error::validation("volume_fraction", "must lie in (0, 1]"));
        }
        if !(self.void_threshold > 0.0 && self.void_threshold < 1.0) {
            return Err(Error::validation("void_threshold", "must lie in (0, 1)"));
        }
        if self.non_design.len() != self.mesh.num_elements() {
            return Err(Error::Config("non-design mask length differs from element count".into()));
        }
        if self.initial.len() != self.mesh.num_nodes() {
            return Err(Error::Config("initial level set length differs from node count".into()));
        }
        Ok(())
    }

    fn pinned_nodes(&self) -> Vec<usize> {
        let mut pinned = vec![false; self.mesh.num_nodes()];
        for (e, _) in self.non_design.iter().enumerate().filter(|(_, &nd)| nd) {
            for &v in self.mesh.element(e) {
                pinned[v] = true;
            }
        }
        pinned.iter().enumerate().filter(|(_, &p)| p).map(|(v, _)| v).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub objective: f64,
    pub volume_fraction: f64,
    #[serde(rename = "G_vol")]
    pub g_vol: f64,
    #[serde(rename = "J_h")]
    pub j_h: f64,
    pub lambda_vol: f64,
    pub lambda_h: f64,
}

/// Fields of one evaluated design, handed to observers and kept for the
/// final design.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub iteration: usize,
    pub phi: Vec<f64>,
    pub chi: Vec<f64>,
    /// Displacement or temperature.
    pub state: Vec<f64>,
    pub p: Vec<f64>,
    /// Empty until the adjoint has been solved for this design.
    pub p_adj: Vec<f64>,
    pub cavity_derivative: Vec<f64>,
    pub voids: VoidComponents,
}

#[derive(Debug, Clone)]
pub struct OptimizationState {
    pub iteration: usize,
    pub field: LevelSetField,
    pub lambda_vol: f64,
    pub lambda_h: f64,
    pub history: Vec<HistoryRow>,
    pub converged: bool,
    /// Fields of the last evaluated design.
    pub last: Snapshot,
}

/// `s / mean|s|`, the mean taken over the domain with the lumped mass.
pub fn normalize(mesh: &SimplexMesh, s: &[f64]) -> Vec<f64> {
    let mean = mean_abs(mesh, s);
    if mean > 0.0 && mean.is_finite() {
        s.iter().map(|v| v / mean).collect()
    } else {
        vec![0.0; s.len()]
    }
}

/// Mass-weighted mean of `|s|` over the domain.
pub fn mean_abs(mesh: &SimplexMesh, s: &[f64]) -> f64 {
    let mass = mesh.lumped_mass();
    let total: f64 = mass.iter().sum();
    s.iter().zip(mass).map(|(v, m)| v.abs() * m).sum::<f64>() / total
}

/// Nodal drive fed to the level-set update:
/// `normalize(normalize(descent) + λ_h · cavity / cavity_scale)`.
///
/// `descent` is the objective sensitivity oriented like the cavity
/// derivative: positive values favour removing material. `cavity_scale` is a
/// reference magnitude for the cavity derivative; a nonpositive scale drops
/// the cavity term. The volume multiplier is applied separately.
pub fn combined_sensitivity(
    mesh: &SimplexMesh,
    descent: &[f64],
    cavity: &[f64],
    cavity_scale: f64,
    lambda_h: f64,
) -> Vec<f64> {
    let obj = normalize(mesh, descent);
    if !(cavity_scale > 0.0) || lambda_h == 0.0 {
        return obj;
    }
    let sum: Vec<f64> = obj
        .iter()
        .zip(cavity)
        .map(|(o, c)| o + lambda_h * c / cavity_scale)
        .collect();
    normalize(mesh, &sum)
}

fn volume(mesh: &SimplexMesh, chi: &[f64]) -> f64 {
    chi.iter().zip(mesh.element_volumes()).map(|(c, v)| c * v).sum()
}

fn relative_spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if mean == 0.0 {
        if max == min {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (max - min) / mean.abs()
    }
}

/// Runs the optimization; `observer` sees every evaluated design.
pub fn run(
    problem: &OptimizationProblem,
    stop: &StopCriteria,
    mut observer: impl FnMut(&Snapshot, &HistoryRow) -> Result<()>,
) -> Result<OptimizationState> {
    problem.validate()?;
    stop.validate()?;
    let mesh = problem.mesh;
    let domain = mesh.total_volume();
    let v_max = problem.volume_fraction * domain;
    let pinned = problem.pinned_nodes();
    let mut evolution = problem.evolution.clone();
    let mut evolver = Evolver::new(mesh, &evolution, &pinned)?;
    let mut is_pinned = vec![false; mesh.num_nodes()];
    for &v in &pinned {
        is_pinned[v] = true;
    }

    let mut phi = problem.initial.phi.clone();
    for &v in &pinned {
        phi[v] = 1.0;
    }
    let mut field = LevelSetField::from_values(phi);
    let mut lambda_vol = 0.0;
    let mut lambda_h = 0.0;
    let mut cavity_scale: f64 = 0.0;
    let mut history: Vec<HistoryRow> = Vec::new();
    let mut state_guess: Option<Vec<f64>> = None;
    let mut p_guess: Option<Vec<f64>> = None;
    let mut adj_guess: Option<Vec<f64>> = None;
    let mut fixed_point = false;
    let mut converged;

    let mut it = 0;
    let last = loop {
        let wrap = |e: Error| Error::Iteration {
            iteration: it,
            source: Box::new(e),
        };

        // Step 2: physics and fictitious field for the current design.
        let chi = characteristic(mesh, &field);
        let (state, objective) = problem.objective.solve(mesh, &chi, state_guess.as_deref()).map_err(wrap)?;
        let model = CavityModel::new(mesh, &sharpen(&chi, problem.void_threshold), &problem.cavity).map_err(wrap)?;
        let p = model.solve_state(p_guess.as_deref()).map_err(wrap)?;
        let j_h = crate::cavity::constraint_value(mesh, &p) / domain;
        let vol = volume(mesh, &chi);
        let voids = label_voids(mesh, &chi, problem.void_threshold, &problem.cavity.exit_tags).map_err(wrap)?;
        let row = HistoryRow {
            iter: it,
            objective,
            volume_fraction: vol / domain,
            g_vol: vol - v_max,
            j_h,
            lambda_vol,
            lambda_h,
        };
        history.push(row);
        log::debug!(
            "iter {it}: objective {objective:.6e} volume {:.4} J_h {j_h:.3e} dt {:.3e} enclosed {}",
            vol / domain,
            evolution.dt,
            voids.enclosed.len()
        );

        // Step 3: convergence.
        let volume_ok = vol - v_max <= stop.volume_tol * v_max;
        let cavity_ok = !problem.enforce_cavity || (j_h <= stop.cavity_tol && voids.enclosed.is_empty());
        let stalled = history.len() >= stop.window && {
            let tail: Vec<f64> = history[history.len() - stop.window..].iter().map(|r| r.objective).collect();
            relative_spread(&tail) < stop.objective_tol
        };
        converged = (stalled || fixed_point) && volume_ok && cavity_ok;

        let mut snapshot = Snapshot {
            iteration: it,
            phi: field.phi.clone(),
            chi: chi.clone(),
            state: state.clone(),
            p: p.clone(),
            p_adj: Vec::new(),
            cavity_derivative: Vec::new(),
            voids,
        };
        if converged || it == stop.max_iterations {
            observer(&snapshot, &row)?;
            break snapshot;
        }

        // Shrink the step when the objective rises once the volume target
        // is met.
        if volume_ok && history.len() >= 2 {
            let prev = history[history.len() - 2].objective;
            let floor = problem.evolution.dt * problem.rules.min_step_ratio;
            if objective > prev * (1.0 + stop.objective_tol) && evolution.dt * problem.rules.step_decay >= floor {
                evolution.dt *= problem.rules.step_decay;
                evolver = Evolver::new(mesh, &evolution, &pinned).map_err(wrap)?;
            }
        }

        // Step 4: cavity adjoint.
        let cavity_drive = if problem.enforce_cavity {
            let p_adj = model.solve_adjoint(&p, adj_guess.as_deref()).map_err(wrap)?;
            let td = model.topological_derivative(&p, &p_adj);
            snapshot.p_adj = p_adj.clone();
            snapshot.cavity_derivative = td.clone();
            adj_guess = Some(p_adj);
            let mut nodal = mesh.element_to_nodal(&td);
            for (v, s) in nodal.iter_mut().enumerate() {
                if is_pinned[v] {
                    *s = 0.0;
                }
            }
            nodal
        } else {
            vec![0.0; mesh.num_nodes()]
        };
        observer(&snapshot, &row)?;

        // Step 5: sensitivities and multipliers. The objective derivatives
        // measure how much a small inclusion of void raises the objective;
        // removal is favoured where they are small.
        let mut descent: Vec<f64> = mesh
            .element_to_nodal(&problem.objective.derivative(mesh, &state, &chi))
            .into_iter()
            .map(|s| -s)
            .collect();
        for (v, s) in descent.iter_mut().enumerate() {
            if is_pinned[v] {
                *s = 0.0;
            }
        }
        if problem.enforce_cavity {
            lambda_h = (lambda_h + problem.rules.rho * j_h).clamp(0.0, problem.rules.lambda_h_max);
        }
        // The cavity derivative is measured against the largest magnitude
        // seen so far. Normalizing it per iteration would blow the residual
        // derivative of a cavity-free design up to the size of the
        // objective term.
        cavity_scale = cavity_scale.max(mean_abs(mesh, &cavity_drive));
        let base_drive = combined_sensitivity(mesh, &descent, &cavity_drive, cavity_scale, lambda_h);
        // The volume drive covers the whole design region; restricting it to
        // nodes with φ ≥ 0 makes the drive jump at the interface and the
        // design chatter.
        let material: Vec<f64> = is_pinned.iter().map(|&p| if p { 0.0 } else { 1.0 }).collect();

        // Step 6: evolve, with λ_vol found by bisection on the volume target.
        let base = evolver.advance_unclamped(&field, &base_drive).map_err(wrap)?;
        let response = evolver.response(&material).map_err(wrap)?;
        let target = v_max.max(vol * (1.0 - problem.rules.volume_step));
        let trial = |lambda: f64| -> (LevelSetField, f64) {
            let phi: Vec<f64> = base.iter().zip(&response).map(|(b, r)| b - lambda * r).collect();
            let next = LevelSetField::from_values(phi);
            let v = volume(mesh, &characteristic(mesh, &next));
            (next, v)
        };
        let (mut next, v0) = trial(0.0);
        lambda_vol = 0.0;
        if v0 > target {
            let mut lo = 0.0;
            let mut hi = 1.0;
            while trial(hi).1 > target {
                hi *= 2.0;
                if hi > 1e12 {
                    return Err(wrap(Error::Config("volume target cannot be met".into())));
                }
            }
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                if trial(mid).1 > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lambda_vol = hi;
            next = trial(hi).0;
        }
        let change = next.phi.iter().zip(&field.phi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        fixed_point = change < FIXED_POINT_TOL;
        field = next;
        state_guess = Some(state);
        p_guess = Some(p);
        it += 1;
    };

    Ok(OptimizationState {
        iteration: it,
        field,
        lambda_vol,
        lambda_h,
        history,
        converged,
        last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_box_mesh, Axis, BoxSpec, TagRule, DEFAULT_TAG};
    use crate::physics::ThermalCase;

    fn square() -> SimplexMesh {
        let spec = BoxSpec::new_2d([0.0, 0.0], [1.0, 1.0], [12, 12]).with_tag(TagRule::plane("cold", Axis::X, 0.0));
        generate_box_mesh(&spec).unwrap()
    }

    fn thermal(mesh: &SimplexMesh, heat: f64, volume_fraction: f64) -> OptimizationProblem<'_> {
        let mut case = ThermalCase::new(&["cold"]);
        case.heat_source = heat;
        OptimizationProblem::new(
            mesh,
            Objective::Thermal(case),
            CavityModelParams::new(&[DEFAULT_TAG, "cold"]),
            volume_fraction,
        )
    }

    #[test]
    fn zero_iterations_evaluates_once() {
        let m = square();
        let stop = StopCriteria {
            max_iterations: 0,
            ..Default::default()
        };
        let state = run(&thermal(&m, 1.0, 0.5), &stop, |_, _| Ok(())).unwrap();
        assert_eq!(state.history.len(), 1);
        assert!(!state.converged);
        assert_eq!(state.field, LevelSetField::uniform(&m, 1.0));
    }

    #[test]
    fn unforced_design_is_a_fixed_point() {
        let m = square();
        let mut problem = thermal(&m, 0.0, 1.0);
        problem.enforce_cavity = false;
        let state = run(&problem, &StopCriteria::default(), |_, _| Ok(())).unwrap();
        assert!(state.converged);
        assert!(state.history.len() <= 2);
        assert_eq!(state.lambda_vol, 0.0);
        assert_eq!(state.lambda_h, 0.0);
    }

    #[test]
    fn history_rows_track_iterations() {
        let m = square();
        let stop = StopCriteria {
            max_iterations: 3,
            ..Default::default()
        };
        let mut seen = Vec::new();
        let state = run(&thermal(&m, 1.0, 0.5), &stop, |s, _| {
            seen.push(s.iteration);
            Ok(())
        })
        .unwrap();
        assert_eq!(state.history.len(), 4);
        assert_eq!(seen, vec![0, 1, 2, 3]);
        assert!(!state.converged);
        for (i, row) in state.history.iter().enumerate() {
            assert_eq!(row.iter, i);
            assert!(row.lambda_vol >= 0.0 && row.lambda_h >= 0.0);
        }
        // Each update meets its volume target.
        for w in state.history.windows(2) {
            assert!(w[1].volume_fraction <= (w[0].volume_fraction * (1.0 - 0.02)).max(0.5) + 1e-12);
        }
    }

    #[test]
    fn combined_sensitivity_cases() {
        let m = square();
        let n = m.num_nodes();
        let obj: Vec<f64> = (0..n).map(|v| (v as f64 * 0.37).sin()).collect();
        let cav: Vec<f64> = (0..n).map(|v| (v as f64 * 0.11).cos()).collect();
        let zero = vec![0.0; n];
        assert_eq!(combined_sensitivity(&m, &obj, &cav, 1.0, 0.0), normalize(&m, &obj));
        assert_eq!(combined_sensitivity(&m, &obj, &cav, 0.0, 5.0), normalize(&m, &obj));
        // Only the cavity term: the result is the normalized cavity field.
        let only = combined_sensitivity(&m, &zero, &cav, 2.0, 3.0);
        for (a, b) in only.iter().zip(normalize(&m, &cav)) {
            assert!((a - b).abs() < 1e-12);
        }
        let mixed = combined_sensitivity(&m, &obj, &cav, 2.0, 3.0);
        assert!((mean_abs(&m, &mixed) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relative_spread_cases() {
        assert_eq!(relative_spread(&[2.0, 2.0, 2.0]), 0.0);
        assert!((relative_spread(&[1.0, 1.1, 0.9]) - 0.2).abs() < 1e-12);
        assert_eq!(relative_spread(&[0.0, 0.0]), 0.0);
    }
}
