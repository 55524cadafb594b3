//! Scenario execution and parameter sweeps.
//!
//! Every run writes into its own output directory: VTK snapshots, a history
//! CSV for optimizations and a `summary.json`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::cavity::{self, CavityModel};
use crate::config::{parse_with_override, RunConfig, ScenarioKind};
use crate::error::{Error, Result};
use crate::io::{csv_string, history_csv, write_atomic, write_json, VtkFile};
use crate::levelset::{characteristic, LevelSetField};
use crate::mesh::{generate_box_mesh, SimplexMesh};
use crate::optimizer::{run, OptimizationProblem, Snapshot};
use crate::oracle::{label_voids, VoidComponents};

pub const SUMMARY_SCHEMA: u32 = 1;
/// A fixed layout is graded "appropriate" when every enclosed void reads
/// above this mean `p`...
pub const ENCLOSED_P_MIN: f64 = 0.9;
/// ...and every open void reads below this one.
pub const OPEN_P_MAX: f64 = 0.05;

#[derive(Debug, Clone, Serialize)]
pub struct ComponentReport {
    pub id: usize,
    pub enclosed: bool,
    pub elements: usize,
    pub volume: f64,
    pub mean_p: f64,
}

#[derive(Debug, Clone, Serialize)]
#[allow(non_snake_case)]
pub struct Summary {
    pub schema: u32,
    pub scenario: &'static str,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    pub volume_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub G_vol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub J_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_vol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_h: Option<f64>,
    pub void_components: usize,
    pub enclosed_components: usize,
    pub enclosed_volume: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<&'static str>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<ComponentReport>,
    pub wall_time_s: f64,
}

impl Summary {
    /// Process exit status: 0 when converged, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.converged {
            0
        } else {
            2
        }
    }
}

/// Builds the mesh, runs the scenario and writes all files.
pub fn run_scenario(config: &RunConfig) -> Result<Summary> {
    let start = Instant::now();
    let mesh = generate_box_mesh(&config.mesh)?;
    config.check_tags(&mesh)?;
    std::fs::create_dir_all(&config.output).map_err(|e| Error::io(&config.output, e))?;
    let mut summary = match config.scenario {
        ScenarioKind::FictitiousValidation => fictitious_validation(config, &mesh)?,
        ScenarioKind::OracleCheck => oracle_check(config, &mesh)?,
        ScenarioKind::ComplianceOpt | ScenarioKind::ThermalOpt => optimization(config, &mesh)?,
    };
    summary.wall_time_s = start.elapsed().as_secs_f64();
    write_json(&config.output.join("summary.json"), &summary)?;
    Ok(summary)
}

fn fixed_layout(config: &RunConfig, mesh: &SimplexMesh) -> (LevelSetField, Vec<f64>) {
    let layout = config.geometry.clone().unwrap_or_default();
    let field = layout.level_set(mesh);
    let chi = characteristic(mesh, &field);
    (field, chi)
}

fn base_summary(config: &RunConfig, mesh: &SimplexMesh, chi: &[f64], voids: &VoidComponents) -> Summary {
    let o = voids.summary();
    Summary {
        schema: SUMMARY_SCHEMA,
        scenario: config.scenario.name(),
        converged: true,
        iterations: None,
        objective: None,
        volume_fraction: volume(mesh, chi) / mesh.total_volume(),
        G_vol: None,
        J_h: None,
        lambda_vol: None,
        lambda_h: None,
        void_components: o.void_components,
        enclosed_components: o.enclosed_components,
        enclosed_volume: o.enclosed_volume,
        verdict: None,
        components: Vec::new(),
        wall_time_s: 0.0,
    }
}

fn volume(mesh: &SimplexMesh, chi: &[f64]) -> f64 {
    chi.iter().zip(mesh.element_volumes()).map(|(c, v)| c * v).sum()
}

fn label_array(voids: &VoidComponents) -> Vec<i64> {
    voids.labels.iter().map(|l| l.map_or(-1, |c| c as i64)).collect()
}

/// Mean `p` over each void component, weighted by element volume.
pub fn component_reports(mesh: &SimplexMesh, voids: &VoidComponents, p: &[f64]) -> Vec<ComponentReport> {
    let pe = mesh.nodal_to_element(p);
    let n = voids.num_components();
    let mut weighted = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for (e, label) in voids.labels.iter().enumerate() {
        if let Some(c) = *label {
            weighted[c] += pe[e] * mesh.element_volume(e);
            counts[c] += 1;
        }
    }
    (0..n)
        .map(|c| ComponentReport {
            id: c,
            enclosed: voids.is_enclosed(c),
            elements: counts[c],
            volume: voids.volumes[c],
            mean_p: weighted[c] / voids.volumes[c],
        })
        .collect()
}

/// "appropriate" when the field separates enclosed from open voids.
pub fn verdict(reports: &[ComponentReport]) -> &'static str {
    let ok = reports
        .iter()
        .all(|r| if r.enclosed { r.mean_p > ENCLOSED_P_MIN } else { r.mean_p < OPEN_P_MAX });
    if ok {
        "appropriate"
    } else {
        "inappropriate"
    }
}

fn fictitious_validation(config: &RunConfig, mesh: &SimplexMesh) -> Result<Summary> {
    let (field, chi) = fixed_layout(config, mesh);
    let voids = label_voids(mesh, &chi, config.void_threshold, &config.cavity.exit_tags)?;
    let model_chi = cavity::sharpen(&chi, config.void_threshold);
    let f = CavityModel::new(mesh, &model_chi, &config.cavity)?.evaluate(None)?;
    let labels = label_array(&voids);
    VtkFile::new(mesh, "fictitious field")
        .point_scalars("phi", &field.phi)?
        .point_scalars("p", &f.p)?
        .point_scalars("p_adj", &f.p_adj)?
        .cell_scalars("chi", &chi)?
        .cell_scalars("td_cavity", &f.derivative)?
        .cell_ints("void_component", &labels)?
        .write(&config.output.join("fictitious.vtk"))?;
    let reports = component_reports(mesh, &voids, &f.p);
    let table = csv_string(
        &["component", "enclosed", "elements", "volume", "mean_p"],
        reports.iter().map(|r| {
            vec![
                r.id.to_string(),
                r.enclosed.to_string(),
                r.elements.to_string(),
                r.volume.to_string(),
                r.mean_p.to_string(),
            ]
        }),
    )?;
    write_atomic(&config.output.join("components.csv"), table.as_bytes())?;
    let mut s = base_summary(config, mesh, &chi, &voids);
    s.J_h = Some(f.constraint / mesh.total_volume());
    s.verdict = Some(verdict(&reports));
    s.components = reports;
    Ok(s)
}

fn oracle_check(config: &RunConfig, mesh: &SimplexMesh) -> Result<Summary> {
    let (field, chi) = fixed_layout(config, mesh);
    let voids = label_voids(mesh, &chi, config.void_threshold, &config.cavity.exit_tags)?;
    let labels = label_array(&voids);
    VtkFile::new(mesh, "void components")
        .point_scalars("phi", &field.phi)?
        .cell_scalars("chi", &chi)?
        .cell_ints("void_component", &labels)?
        .write(&config.output.join("oracle.vtk"))?;
    Ok(base_summary(config, mesh, &chi, &voids))
}

fn snapshot_vtk(mesh: &SimplexMesh, s: &Snapshot, scenario: ScenarioKind, path: &Path) -> Result<()> {
    let labels = label_array(&s.voids);
    let mut vtk = VtkFile::new(mesh, &format!("iteration {}", s.iteration))
        .point_scalars("phi", &s.phi)?
        .point_scalars("p", &s.p)?;
    if !s.p_adj.is_empty() {
        vtk = vtk.point_scalars("p_adj", &s.p_adj)?;
    }
    vtk = match scenario {
        ScenarioKind::ThermalOpt => vtk.point_scalars("temp", &s.state)?,
        _ => vtk.point_vectors("u", &s.state, mesh.dim())?,
    };
    vtk = vtk.cell_scalars("chi", &s.chi)?;
    if !s.cavity_derivative.is_empty() {
        vtk = vtk.cell_scalars("td_cavity", &s.cavity_derivative)?;
    }
    vtk.cell_ints("void_component", &labels)?.write(path)
}

fn optimization(config: &RunConfig, mesh: &SimplexMesh) -> Result<Summary> {
    let objective = config
        .objective()
        .ok_or_else(|| Error::Config("optimization scenario without physics section".into()))?;
    let mut problem = OptimizationProblem::new(mesh, objective, config.cavity.clone(), config.design.volume_fraction);
    problem.enforce_cavity = config.design.enforce_cavity;
    problem.evolution = config.evolution.clone();
    problem.rules = config.rules.clone();
    problem.void_threshold = config.void_threshold;
    problem.non_design = config.non_design_mask(mesh);
    if let Some(layout) = &config.geometry {
        problem.initial = layout.level_set(mesh);
    }
    let every = config.snapshot_every;
    let out = config.output.clone();
    let scenario = config.scenario;
    let state = run(&problem, &config.stop, |s, row| {
        log::info!(
            "iter {:4}  objective {:.6e}  volume {:.4}  J_h {:.3e}  enclosed {}",
            row.iter,
            row.objective,
            row.volume_fraction,
            row.j_h,
            s.voids.enclosed.len()
        );
        if every > 0 && s.iteration % every == 0 {
            snapshot_vtk(mesh, s, scenario, &out.join(format!("snapshot_{:04}.vtk", s.iteration)))?;
        }
        Ok(())
    })?;
    snapshot_vtk(mesh, &state.last, scenario, &out.join("final.vtk"))?;
    write_atomic(&out.join("history.csv"), history_csv(&state.history)?.as_bytes())?;
    let row = *state.history.last().expect("history holds the initial evaluation");
    let mut s = base_summary(config, mesh, &state.last.chi, &state.last.voids);
    s.converged = state.converged;
    s.iterations = Some(state.iteration);
    s.objective = Some(row.objective);
    s.G_vol = Some(row.g_vol);
    s.J_h = Some(row.j_h);
    s.lambda_vol = Some(row.lambda_vol);
    s.lambda_h = Some(row.lambda_h);
    Ok(s)
}

/// One line of a sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: String,
    pub output: PathBuf,
    pub a_p: f64,
    pub epsilon_p: f64,
    /// Verdict for fixed layouts, convergence status for optimizations,
    /// `error: …` when the run failed.
    pub result: String,
    pub exit_code: i32,
}

/// Runs one scenario per value of the dotted parameter `param`, in
/// parallel on a pool of `threads` workers (all cores when `None`).
///
/// Each run writes to `<output>/<param>_<value>`; the table is written to
/// `<output>/sweep.csv`.
pub fn run_sweep(
    text: &str,
    param: &str,
    values: &[String],
    output: Option<&Path>,
    threads: Option<usize>,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut configs = Vec::with_capacity(values.len());
    let mut base = None;
    for v in values {
        let mut c = parse_with_override(text, param, v)?;
        let root = output.map(Path::to_path_buf).unwrap_or_else(|| c.output.clone());
        c.output = root.join(format!("{}_{}", param.replace('.', "_"), sanitize(v)));
        base.get_or_insert(root);
        configs.push(c);
    }
    let base = base.expect("at least one value");
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        configs
            .par_iter()
            .zip(values.par_iter())
            .map(|(c, v)| {
                let (result, exit_code) = match run_scenario(c) {
                    Ok(s) => {
                        let r = match s.verdict {
                            Some(v) => v.to_string(),
                            None if s.converged => "converged".to_string(),
                            None => "not-converged".to_string(),
                        };
                        (r, s.exit_code())
                    }
                    Err(e) => (format!("error: {e}"), 1),
                };
                SweepRow {
                    value: v.clone(),
                    output: c.output.clone(),
                    a_p: c.cavity.a_p,
                    epsilon_p: c.cavity.epsilon_p,
                    result,
                    exit_code,
                }
            })
            .collect()
    });
    let table = csv_string(
        &[param, "a_p", "epsilon_p", "result", "exit_code"],
        rows.iter().map(|r| {
            vec![
                r.value.clone(),
                r.a_p.to_string(),
                r.epsilon_p.to_string(),
                r.result.clone(),
                r.exit_code.to_string(),
            ]
        }),
    )?;
    write_atomic(&base.join("sweep.csv"), table.as_bytes())?;
    Ok(rows)
}

fn sanitize(v: &str) -> String {
    v.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '+') { c } else { '_' })
        .collect()
}
