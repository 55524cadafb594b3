//! Initial layouts built from boxes and discs painted over a background.
//!
//! Later primitives overwrite earlier ones. Containment is closed with a
//! small tolerance so nodes exactly on a primitive boundary count as inside.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levelset::LevelSetField;
use crate::mesh::SimplexMesh;

const INSIDE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum Primitive {
    /// Axis-aligned box; trailing coordinates may be omitted in 2D.
    Box { min: Vec<f64>, max: Vec<f64>, material: bool },
    /// Disc in 2D, ball in 3D.
    Disc { center: Vec<f64>, radius: f64, material: bool },
}

impl Primitive {
    pub fn rect(min: &[f64], max: &[f64], material: bool) -> Self {
        Primitive::Box {
            min: min.to_vec(),
            max: max.to_vec(),
            material,
        }
    }

    pub fn disc(center: &[f64], radius: f64, material: bool) -> Self {
        Primitive::Disc {
            center: center.to_vec(),
            radius,
            material,
        }
    }

    pub fn is_material(&self) -> bool {
        match self {
            Primitive::Box { material, .. } | Primitive::Disc { material, .. } => *material,
        }
    }

    pub fn contains(&self, x: &[f64; 3]) -> bool {
        match self {
            Primitive::Box { min, max, .. } => min
                .iter()
                .zip(max)
                .enumerate()
                .all(|(i, (lo, hi))| x[i] >= lo - INSIDE_TOL && x[i] <= hi + INSIDE_TOL),
            Primitive::Disc { center, radius, .. } => {
                let d2: f64 = center.iter().enumerate().map(|(i, c)| (x[i] - c).powi(2)).sum();
                d2.sqrt() <= radius + INSIDE_TOL
            }
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Primitive::Box { min, max, .. } => {
                if min.len() != dim || max.len() != dim {
                    return Err(Error::validation("geometry.box", format!("needs {dim} coordinates")));
                }
                if min.iter().zip(max).any(|(a, b)| !(a < b)) {
                    return Err(Error::validation("geometry.box", "min must be below max"));
                }
            }
            Primitive::Disc { center, radius, .. } => {
                if center.len() != dim {
                    return Err(Error::validation("geometry.disc", format!("needs {dim} coordinates")));
                }
                if !(*radius > 0.0) {
                    return Err(Error::validation("geometry.disc", "radius must be positive"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layout {
    #[serde(default = "default_background")]
    pub background_material: bool,
    #[serde(default)]
    pub shapes: Vec<Primitive>,
}

fn default_background() -> bool {
    true
}

impl Default for Layout {
    fn default() -> Self {
        Layout::material()
    }
}

impl Layout {
    pub fn material() -> Self {
        Layout {
            background_material: true,
            shapes: Vec::new(),
        }
    }

    pub fn void() -> Self {
        Layout {
            background_material: false,
            shapes: Vec::new(),
        }
    }

    pub fn with(mut self, shape: Primitive) -> Self {
        self.shapes.push(shape);
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        self.shapes.iter().try_for_each(|s| s.validate(dim))
    }

    pub fn is_material(&self, x: &[f64; 3]) -> bool {
        self.shapes
            .iter()
            .rev()
            .find(|s| s.contains(x))
            .map_or(self.background_material, Primitive::is_material)
    }

    /// Nodal `φ = ±1`.
    pub fn level_set(&self, mesh: &SimplexMesh) -> LevelSetField {
        LevelSetField::from_values(
            mesh.nodes()
                .iter()
                .map(|x| if self.is_material(x) { 1.0 } else { -1.0 })
                .collect(),
        )
    }
}
