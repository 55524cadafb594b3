#![allow(dead_code)]

pub mod metrics;

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topopt::geometry::{Layout, Primitive};
use topopt::levelset::characteristic;
use topopt::mesh::{generate_box_mesh, BoxSpec, SimplexMesh};
use topopt::oracle::VoidComponents;

pub fn unit_square(n: usize) -> SimplexMesh {
    generate_box_mesh(&BoxSpec::new_2d([0.0, 0.0], [1.0, 1.0], [n, n])).unwrap()
}

/// Material square with random void discs and channels; some voids touch
/// the boundary, some are sealed.
pub fn blob_layout(seed: u64) -> Layout {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layout = Layout::material();
    for _ in 0..rng.random_range(3..7) {
        let c = [rng.random_range(0.1..0.9), rng.random_range(0.1..0.9)];
        let r = rng.random_range(0.06..0.14);
        layout = layout.with(Primitive::disc(&c, r, false));
        if rng.random_bool(0.3) {
            // A channel from the disc to the nearest vertical edge.
            let w = rng.random_range(0.05..0.08);
            let (x0, x1) = if c[0] < 0.5 { (0.0, c[0]) } else { (c[0], 1.0) };
            layout = layout.with(Primitive::rect(&[x0, c[1] - w / 2.0], &[x1, c[1] + w / 2.0], false));
        }
    }
    layout
}

pub fn layout_chi(mesh: &SimplexMesh, layout: &Layout) -> Vec<f64> {
    characteristic(mesh, &layout.level_set(mesh))
}

/// Elements whose centroid lies within `band` of the outer boundary of the
/// unit square.
pub fn in_boundary_band(mesh: &SimplexMesh, e: usize, band: f64) -> bool {
    let c = mesh.element_centroid(e);
    c[0] < band || c[1] < band || c[0] > 1.0 - band || c[1] > 1.0 - band
}

/// Void components whose only link to the exit boundary or to another void
/// is a shared mesh node. Face-adjacency flood fill and a nodal field
/// disagree on these by construction.
pub fn vertex_contact_components(mesh: &SimplexMesh, voids: &VoidComponents, exits: &[&str]) -> Vec<bool> {
    let exit_nodes: HashSet<usize> = mesh.tag_nodes(exits).unwrap().into_iter().collect();
    let mut owners: HashMap<usize, HashSet<usize>> = HashMap::new();
    for e in 0..mesh.num_elements() {
        if let Some(c) = voids.labels[e] {
            for &n in mesh.element(e) {
                owners.entry(n).or_default().insert(c);
            }
        }
    }
    let mut contact = vec![false; voids.num_components()];
    for (n, cs) in &owners {
        for &c in cs {
            if cs.len() > 1 || (voids.is_enclosed(c) && exit_nodes.contains(n)) {
                contact[c] = true;
            }
        }
    }
    contact
}
