//! Run configuration read from TOML.
//!
//! Unknown keys are rejected everywhere. Sections that are not needed by the
//! selected scenario may be omitted; defaults are filled in on parse.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cavity::CavityModelParams;
use crate::error::{Error, Result};
use crate::geometry::{Layout, Primitive};
use crate::levelset::EvolutionParams;
use crate::mesh::{BoxSpec, SimplexMesh, DEFAULT_TAG};
use crate::optimizer::{Objective, StopCriteria, UpdateRules};
use crate::oracle::DEFAULT_VOID_THRESHOLD;
use crate::physics::{ComplianceCase, ThermalCase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Solve the fictitious field for a fixed layout and grade the separation.
    FictitiousValidation,
    ComplianceOpt,
    ThermalOpt,
    /// Label void components of a fixed layout.
    OracleCheck,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::FictitiousValidation => "fictitious-validation",
            ScenarioKind::ComplianceOpt => "compliance-opt",
            ScenarioKind::ThermalOpt => "thermal-opt",
            ScenarioKind::OracleCheck => "oracle-check",
        }
    }

    pub fn is_optimization(self) -> bool {
        matches!(self, ScenarioKind::ComplianceOpt | ScenarioKind::ThermalOpt)
    }
}

/// Settings of the design problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSettings {
    /// Volume limit as a fraction of the domain.
    #[serde(default = "default_volume_fraction")]
    pub volume_fraction: f64,
    #[serde(default = "default_true")]
    pub enforce_cavity: bool,
    /// Elements whose centroid falls inside any of these shapes stay
    /// material. The `material` flag of each shape is ignored.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub non_design: Vec<Primitive>,
}

fn default_volume_fraction() -> f64 {
    0.4
}

fn default_true() -> bool {
    true
}

impl Default for DesignSettings {
    fn default() -> Self {
        DesignSettings {
            volume_fraction: default_volume_fraction(),
            enforce_cavity: true,
            non_design: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// VTK snapshot interval in iterations; 0 writes only the final design.
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    /// Element `χ` below which the oracle counts an element as void.
    #[serde(default = "default_void_threshold")]
    pub void_threshold: f64,
    pub mesh: BoxSpec,
    #[serde(default = "default_cavity")]
    pub cavity: CavityModelParams,
    #[serde(default)]
    pub evolution: EvolutionParams,
    #[serde(default)]
    pub stop: StopCriteria,
    #[serde(default)]
    pub rules: UpdateRules,
    #[serde(default)]
    pub design: DesignSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compliance: Option<ComplianceCase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal: Option<ThermalCase>,
    /// Fixed layout for validation scenarios; initial design otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<Layout>,
}

fn default_output() -> PathBuf {
    PathBuf::from("output")
}

fn default_snapshot_every() -> usize {
    10
}

fn default_void_threshold() -> f64 {
    DEFAULT_VOID_THRESHOLD
}

fn default_cavity() -> CavityModelParams {
    CavityModelParams::new(&[DEFAULT_TAG])
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
    config.validate()?;
    Ok(config)
}

/// Parses a configuration after overriding the dotted `path` with `value`.
///
/// The value is read as TOML, so numbers, booleans and arrays all work.
pub fn parse_with_override(text: &str, path: &str, value: &str) -> Result<RunConfig> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
    let parsed: toml::Value = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("bad parameter path `{path}`")));
    }
    let mut cur = &mut table;
    for key in &keys[..keys.len() - 1] {
        cur = cur
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{key}` in `{path}` is not a section")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), parsed);
    let config: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Parse(format!("{path} = {value}: {}", e.message())))?;
    config.validate()?;
    Ok(config)
}

fn parse_error(text: &str, e: &toml::de::Error) -> Error {
    match e.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            Error::Parse(format!("line {line}: {}", e.message().trim()))
        }
        None => Error::Parse(e.message().trim().to_string()),
    }
}

impl RunConfig {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.mesh.validate()?;
        self.cavity.validate()?;
        self.evolution.validate()?;
        self.stop.validate()?;
        self.rules.validate()?;
        if !(self.void_threshold > 0.0 && self.void_threshold < 1.0) {
            return Err(Error::validation("void_threshold", "must lie in (0, 1)"));
        }
        let v = self.design.volume_fraction;
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::validation("volume_fraction", "must lie in (0, 1]"));
        }
        for shape in &self.design.non_design {
            shape.validate(self.mesh.dim)?;
        }
        if let Some(layout) = &self.geometry {
            layout.validate(self.mesh.dim)?;
        }
        match self.scenario {
            ScenarioKind::ComplianceOpt => {
                self.compliance
                    .as_ref()
                    .ok_or_else(|| Error::validation("compliance", "section is required for compliance-opt"))?
                    .validate()?;
            }
            ScenarioKind::ThermalOpt => {
                self.thermal
                    .as_ref()
                    .ok_or_else(|| Error::validation("thermal", "section is required for thermal-opt"))?
                    .validate()?;
            }
            ScenarioKind::FictitiousValidation | ScenarioKind::OracleCheck => {
                if self.geometry.is_none() {
                    return Err(Error::validation("geometry", "section is required for fixed-layout scenarios"));
                }
            }
        }
        Ok(())
    }

    /// Checks that every referenced boundary tag exists on `mesh`.
    pub fn check_tags(&self, mesh: &SimplexMesh) -> Result<()> {
        let mut tags: Vec<&str> = self.cavity.exit_tags.iter().map(String::as_str).collect();
        tags.extend(self.evolution.material_tags.iter().map(String::as_str));
        if self.scenario == ScenarioKind::ComplianceOpt {
            if let Some(c) = &self.compliance {
                tags.extend(c.tractions.iter().map(|t| t.tag.as_str()));
                tags.extend(c.supports.iter().map(|s| s.tag.as_str()));
            }
        }
        if self.scenario == ScenarioKind::ThermalOpt {
            if let Some(t) = &self.thermal {
                tags.extend(t.temperature_tags.iter().map(String::as_str));
            }
        }
        match tags.into_iter().find(|t| !mesh.has_tag(t)) {
            Some(t) => Err(Error::UnknownTag(t.to_string())),
            None => Ok(()),
        }
    }

    pub fn objective(&self) -> Option<Objective> {
        match self.scenario {
            ScenarioKind::ComplianceOpt => self.compliance.clone().map(Objective::Compliance),
            ScenarioKind::ThermalOpt => self.thermal.clone().map(Objective::Thermal),
            _ => None,
        }
    }

    /// Non-design mask over the elements of `mesh`.
    pub fn non_design_mask(&self, mesh: &SimplexMesh) -> Vec<bool> {
        (0..mesh.num_elements())
            .map(|e| {
                let c = mesh.element_centroid(e);
                self.design.non_design.iter().any(|s| s.contains(&c))
            })
            .collect()
    }
}
