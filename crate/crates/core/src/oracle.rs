//! Flood-fill ground truth for powder removability.
//!
//! Void elements (`χ_e` below a threshold) are grouped into face-connected
//! components. A component is *touching* when one of its elements owns a
//! boundary facet on the powder exit `Γ_p`, and *enclosed* otherwise.
//! Vertex-only contacts do not connect components.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{SimplexMesh, NO_NEIGHBOR};

pub const DEFAULT_VOID_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct VoidComponents {
    /// Component id per element; `None` for material.
    pub labels: Vec<Option<usize>>,
    /// Volume of each component.
    pub volumes: Vec<f64>,
    pub touching: Vec<usize>,
    pub enclosed: Vec<usize>,
}

impl VoidComponents {
    pub fn num_components(&self) -> usize {
        self.volumes.len()
    }

    pub fn enclosed_volume(&self) -> f64 {
        self.enclosed.iter().fold(0.0, |acc, &c| acc + self.volumes[c])
    }

    pub fn is_enclosed(&self, component: usize) -> bool {
        self.enclosed.binary_search(&component).is_ok()
    }

    /// Per-element flag for membership in an enclosed component.
    pub fn enclosed_mask(&self) -> Vec<bool> {
        self.labels
            .iter()
            .map(|l| l.is_some_and(|c| self.is_enclosed(c)))
            .collect()
    }

    pub fn summary(&self) -> OracleSummary {
        OracleSummary {
            void_components: self.num_components(),
            enclosed_components: self.enclosed.len(),
            enclosed_volume: self.enclosed_volume(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleSummary {
    pub void_components: usize,
    pub enclosed_components: usize,
    pub enclosed_volume: f64,
}

pub fn label_voids<S: AsRef<str>>(
    mesh: &SimplexMesh,
    chi: &[f64],
    threshold: f64,
    exit_tags: &[S],
) -> Result<VoidComponents> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!("void threshold {threshold} must lie in (0, 1)")));
    }
    if chi.len() != mesh.num_elements() {
        return Err(Error::Config("χ length differs from element count".into()));
    }
    let mut exit_facets = 0;
    for tag in exit_tags {
        exit_facets += mesh.tag_facets(tag.as_ref())?.len();
    }
    if exit_facets == 0 {
        return Err(Error::Config("powder exit boundary is empty".into()));
    }
    let on_exit = mesh.elements_touching(exit_tags)?;

    let ne = mesh.num_elements();
    let mut labels: Vec<Option<usize>> = vec![None; ne];
    let mut volumes = Vec::new();
    let mut touching = Vec::new();
    let mut enclosed = Vec::new();
    let mut queue = VecDeque::new();
    for seed in 0..ne {
        if chi[seed] >= threshold || labels[seed].is_some() {
            continue;
        }
        let id = volumes.len();
        labels[seed] = Some(id);
        queue.push_back(seed);
        let mut volume = 0.0;
        let mut reaches_exit = false;
        while let Some(e) = queue.pop_front() {
            volume += mesh.element_volume(e);
            reaches_exit |= on_exit[e];
            for &n in mesh.neighbors(e) {
                if n != NO_NEIGHBOR && labels[n].is_none() && chi[n] < threshold {
                    labels[n] = Some(id);
                    queue.push_back(n);
                }
            }
        }
        volumes.push(volume);
        if reaches_exit {
            touching.push(id);
        } else {
            enclosed.push(id);
        }
    }
    Ok(VoidComponents {
        labels,
        volumes,
        touching,
        enclosed,
    })
}
