//! Structured simplex meshes over box-shaped design domains.
//!
//! A [`SimplexMesh`] is immutable once built. Besides connectivity it caches
//! everything the solvers ask for repeatedly: element measures, P1 shape
//! function gradients, lumped nodal masses, face neighbours and the tagged
//! boundary facets used to place boundary conditions.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tag carried by every boundary facet that no rule claims.
pub const DEFAULT_TAG: &str = "default";

/// Marker used in [`SimplexMesh::neighbors`] for facets on the boundary.
pub const NO_NEIGHBOR: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Assigns `name` to boundary facets whose centroid lies on the plane
/// `axis = at` (when given) and inside the optional `[min, max]` box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagRule {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<Vec<f64>>,
}

impl TagRule {
    /// Rule selecting the whole face `axis = at`.
    pub fn plane(name: &str, axis: Axis, at: f64) -> Self {
        TagRule {
            name: name.to_string(),
            axis: Some(axis),
            at: Some(at),
            min: None,
            max: None,
        }
    }

    /// Restricts the rule to centroids inside `[min, max]`.
    pub fn within(mut self, min: &[f64], max: &[f64]) -> Self {
        self.min = Some(min.to_vec());
        self.max = Some(max.to_vec());
        self
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::InvalidSpec("tag rule with empty name".into()));
        }
        if self.axis.is_some() != self.at.is_some() {
            return Err(Error::InvalidSpec(format!(
                "tag rule `{}`: `axis` and `at` must be given together",
                self.name
            )));
        }
        if let Some(axis) = self.axis {
            if axis.index() >= dim {
                return Err(Error::InvalidSpec(format!(
                    "tag rule `{}`: axis {:?} not available in {}D",
                    self.name, axis, dim
                )));
            }
        }
        for bound in [&self.min, &self.max].into_iter().flatten() {
            if bound.len() != dim {
                return Err(Error::InvalidSpec(format!(
                    "tag rule `{}`: bounds need {} components",
                    self.name, dim
                )));
            }
        }
        Ok(())
    }

    fn matches(&self, c: &[f64; 3], dim: usize, tol: f64) -> bool {
        if let (Some(axis), Some(at)) = (self.axis, self.at) {
            if (c[axis.index()] - at).abs() > tol {
                return false;
            }
        }
        if let Some(min) = &self.min {
            if (0..dim).any(|k| c[k] < min[k] - tol) {
                return false;
            }
        }
        if let Some(max) = &self.max {
            if (0..dim).any(|k| c[k] > max[k] + tol) {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub dim: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Cell count per axis.
    pub cells: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<TagRule>,
}

impl BoxSpec {
    pub fn new_2d(lower: [f64; 2], upper: [f64; 2], cells: [usize; 2]) -> Self {
        BoxSpec {
            dim: 2,
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            cells: cells.to_vec(),
            tags: Vec::new(),
        }
    }

    pub fn new_3d(lower: [f64; 3], upper: [f64; 3], cells: [usize; 3]) -> Self {
        BoxSpec {
            dim: 3,
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            cells: cells.to_vec(),
            tags: Vec::new(),
        }
    }

    pub fn with_tag(mut self, rule: TagRule) -> Self {
        self.tags.push(rule);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::InvalidSpec(format!("dimension {} not supported", self.dim)));
        }
        if self.lower.len() != self.dim || self.upper.len() != self.dim || self.cells.len() != self.dim {
            return Err(Error::InvalidSpec(format!(
                "lower, upper and cells need {} components",
                self.dim
            )));
        }
        if self.cells.contains(&0) {
            return Err(Error::InvalidSpec("zero subdivisions along an axis".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(u > l)) {
            return Err(Error::InvalidSpec("upper corner must exceed lower corner".into()));
        }
        for rule in &self.tags {
            rule.validate(self.dim)?;
        }
        Ok(())
    }

    pub fn diagonal(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct SimplexMesh {
    dim: usize,
    nodes: Vec<[f64; 3]>,
    elements: Vec<usize>,
    facets: Vec<usize>,
    facet_owner: Vec<usize>,
    facet_tag: Vec<usize>,
    tag_names: Vec<String>,
    tags: BTreeMap<String, Vec<usize>>,
    volumes: Vec<f64>,
    gradients: Vec<[f64; 3]>,
    neighbors: Vec<usize>,
    lumped_mass: Vec<f64>,
}

/// Builds the structured mesh described by `spec`.
///
/// 2D cells are split into two triangles with the diagonal alternating in a
/// checkerboard pattern; 3D cells use the six-tetrahedron Kuhn split along the
/// main diagonal, which is conforming across neighbouring cells.
pub fn generate_box_mesh(spec: &BoxSpec) -> Result<SimplexMesh> {
    spec.validate()?;
    let dim = spec.dim;
    let mut counts = [1usize; 3];
    for k in 0..dim {
        counts[k] = spec.cells[k] + 1;
    }
    let coord = |k: usize, i: usize| {
        if i == spec.cells[k] {
            spec.upper[k]
        } else {
            spec.lower[k] + (spec.upper[k] - spec.lower[k]) * i as f64 / spec.cells[k] as f64
        }
    };

    let mut nodes = Vec::with_capacity(counts.iter().product());
    for k in 0..counts[2] {
        for j in 0..counts[1] {
            for i in 0..counts[0] {
                let mut x = [0.0; 3];
                x[0] = coord(0, i);
                x[1] = coord(1, j);
                if dim == 3 {
                    x[2] = coord(2, k);
                }
                nodes.push(x);
            }
        }
    }
    let id = |i: usize, j: usize, k: usize| i + counts[0] * (j + counts[1] * k);

    let mut elements = Vec::new();
    if dim == 2 {
        for j in 0..spec.cells[1] {
            for i in 0..spec.cells[0] {
                let (n00, n10, n01, n11) = (id(i, j, 0), id(i + 1, j, 0), id(i, j + 1, 0), id(i + 1, j + 1, 0));
                if (i + j) % 2 == 0 {
                    elements.extend_from_slice(&[n00, n10, n11, n00, n11, n01]);
                } else {
                    elements.extend_from_slice(&[n00, n10, n01, n10, n11, n01]);
                }
            }
        }
    } else {
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for k in 0..spec.cells[2] {
            for j in 0..spec.cells[1] {
                for i in 0..spec.cells[0] {
                    for perm in PERMS {
                        let mut at = [i, j, k];
                        let mut tet = [id(i, j, k), 0, 0, 0];
                        for (step, &axis) in perm.iter().enumerate() {
                            at[axis] += 1;
                            tet[step + 1] = id(at[0], at[1], at[2]);
                        }
                        elements.extend_from_slice(&tet);
                    }
                }
            }
        }
    }

    SimplexMesh::from_parts(dim, nodes, elements, &spec.tags, 1e-9 * spec.diagonal())
}

impl SimplexMesh {
    /// Assembles a mesh from raw connectivity. Elements are reoriented to
    /// positive signed volume; degenerate elements are rejected.
    pub fn from_parts(
        dim: usize,
        nodes: Vec<[f64; 3]>,
        mut elements: Vec<usize>,
        rules: &[TagRule],
        tol: f64,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidSpec(format!("dimension {dim} not supported")));
        }
        let nv = dim + 1;
        if !elements.len().is_multiple_of(nv) {
            return Err(Error::InvalidSpec("connectivity length is not a multiple of d+1".into()));
        }
        if let Some(&bad) = elements.iter().find(|&&n| n >= nodes.len()) {
            return Err(Error::InvalidSpec(format!("element references missing node {bad}")));
        }
        for rule in rules {
            rule.validate(dim)?;
        }
        let n_elem = elements.len() / nv;

        let mut volumes = Vec::with_capacity(n_elem);
        let mut gradients = Vec::with_capacity(n_elem * nv);
        for e in 0..n_elem {
            let conn = &mut elements[e * nv..(e + 1) * nv];
            let mut signed = signed_volume(dim, &nodes, conn);
            if signed < 0.0 {
                conn.swap(0, 1);
                signed = -signed;
            }
            if !(signed > 0.0) {
                return Err(Error::InvalidSpec(format!("element {e} is degenerate")));
            }
            volumes.push(signed);
            gradients.extend_from_slice(&shape_gradients(dim, &nodes, conn));
        }

        // Facet opposite local vertex `i` is keyed by its sorted node ids.
        let key = |conn: &[usize], skip: usize| {
            let mut k = [usize::MAX; 3];
            let mut n = 0;
            for (l, &v) in conn.iter().enumerate() {
                if l != skip {
                    k[n] = v;
                    n += 1;
                }
            }
            k[..n].sort_unstable();
            k
        };
        let mut seen: HashMap<[usize; 3], (usize, usize)> = HashMap::with_capacity(n_elem * nv);
        let mut neighbors = vec![NO_NEIGHBOR; n_elem * nv];
        for e in 0..n_elem {
            let conn = &elements[e * nv..(e + 1) * nv];
            for l in 0..nv {
                let k = key(conn, l);
                match seen.remove(&k) {
                    Some((other, ol)) => {
                        if neighbors[other * nv + ol] != NO_NEIGHBOR {
                            return Err(Error::InvalidSpec("facet shared by more than two elements".into()));
                        }
                        neighbors[other * nv + ol] = e;
                        neighbors[e * nv + l] = other;
                    }
                    None => {
                        seen.insert(k, (e, l));
                    }
                }
            }
        }

        // Walk elements in order so facet numbering is deterministic.
        let mut facets = Vec::new();
        let mut facet_owner = Vec::new();
        for e in 0..n_elem {
            let conn = &elements[e * nv..(e + 1) * nv];
            for l in 0..nv {
                if neighbors[e * nv + l] == NO_NEIGHBOR {
                    for (m, &v) in conn.iter().enumerate() {
                        if m != l {
                            facets.push(v);
                        }
                    }
                    facet_owner.push(e);
                }
            }
        }

        let mut tag_names = vec![DEFAULT_TAG.to_string()];
        for rule in rules {
            if !tag_names.contains(&rule.name) {
                tag_names.push(rule.name.clone());
            }
        }
        let n_facets = facet_owner.len();
        let mut facet_tag = Vec::with_capacity(n_facets);
        let mut tags: BTreeMap<String, Vec<usize>> = tag_names.iter().map(|n| (n.clone(), Vec::new())).collect();
        for f in 0..n_facets {
            let c = centroid(&nodes, &facets[f * dim..(f + 1) * dim]);
            let name = rules
                .iter()
                .find(|r| r.matches(&c, dim, tol))
                .map_or(DEFAULT_TAG, |r| r.name.as_str());
            let idx = tag_names.iter().position(|n| n == name).unwrap();
            facet_tag.push(idx);
            tags.get_mut(name).unwrap().push(f);
        }

        let mut lumped_mass = vec![0.0; nodes.len()];
        for e in 0..n_elem {
            let share = volumes[e] / nv as f64;
            for &v in &elements[e * nv..(e + 1) * nv] {
                lumped_mass[v] += share;
            }
        }

        Ok(SimplexMesh {
            dim,
            nodes,
            elements,
            facets,
            facet_owner,
            facet_tag,
            tag_names,
            tags,
            volumes,
            gradients,
            neighbors,
            lumped_mass,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Vertices per element.
    pub fn nodes_per_element(&self) -> usize {
        self.dim + 1
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.volumes.len()
    }

    pub fn num_boundary_facets(&self) -> usize {
        self.facet_owner.len()
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> [f64; 3] {
        self.nodes[i]
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.elements[e * nv..(e + 1) * nv]
    }

    pub fn elements(&self) -> impl ExactSizeIterator<Item = &[usize]> + '_ {
        self.elements.chunks_exact(self.dim + 1)
    }

    pub fn element_volume(&self, e: usize) -> f64 {
        self.volumes[e]
    }

    pub fn element_volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Constant gradients of the element's P1 shape functions, in local vertex order.
    pub fn gradients(&self, e: usize) -> &[[f64; 3]] {
        let nv = self.dim + 1;
        &self.gradients[e * nv..(e + 1) * nv]
    }

    /// Face neighbours; entry `i` lies across the facet opposite local vertex `i`.
    pub fn neighbors(&self, e: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.neighbors[e * nv..(e + 1) * nv]
    }

    pub fn element_centroid(&self, e: usize) -> [f64; 3] {
        centroid(&self.nodes, self.element(e))
    }

    /// Row sums of the P1 mass matrix: `|supp N_i| / (d+1)`.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped_mass
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    pub fn facet(&self, f: usize) -> &[usize] {
        &self.facets[f * self.dim..(f + 1) * self.dim]
    }

    pub fn facet_owner(&self, f: usize) -> usize {
        self.facet_owner[f]
    }

    pub fn facet_tag(&self, f: usize) -> &str {
        &self.tag_names[self.facet_tag[f]]
    }

    pub fn tag_names(&self) -> impl Iterator<Item = &str> {
        self.tags.keys().map(String::as_str)
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.contains_key(tag)
    }

    pub fn tag_facets(&self, tag: &str) -> Result<&[usize]> {
        self.tags
            .get(tag)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownTag(tag.to_string()))
    }

    /// Length (2D) or area (3D) of a boundary facet.
    pub fn facet_measure(&self, f: usize) -> f64 {
        let v = self.facet(f);
        let a = self.nodes[v[0]];
        let b = self.nodes[v[1]];
        let ab = sub(&b, &a);
        if self.dim == 2 {
            norm(&ab)
        } else {
            let ac = sub(&self.nodes[v[2]], &a);
            0.5 * norm(&cross(&ab, &ac))
        }
    }

    /// Distinct nodes on facets carrying any of `tags`, in ascending order.
    pub fn tag_nodes<S: AsRef<str>>(&self, tags: &[S]) -> Result<Vec<usize>> {
        let mut on = vec![false; self.nodes.len()];
        for tag in tags {
            for &f in self.tag_facets(tag.as_ref())? {
                for &v in self.facet(f) {
                    on[v] = true;
                }
            }
        }
        Ok(on.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect())
    }

    /// Per-element flag: owns at least one boundary facet carrying one of `tags`.
    pub fn elements_touching<S: AsRef<str>>(&self, tags: &[S]) -> Result<Vec<bool>> {
        let mut touching = vec![false; self.num_elements()];
        for tag in tags {
            for &f in self.tag_facets(tag.as_ref())? {
                touching[self.facet_owner[f]] = true;
            }
        }
        Ok(touching)
    }

    /// Maps an element field to nodes by volume-weighted averaging over the
    /// elements sharing each node.
    pub fn element_to_nodal(&self, values: &[f64]) -> Vec<f64> {
        let mut sum = vec![0.0; self.nodes.len()];
        let mut weight = vec![0.0; self.nodes.len()];
        for (e, conn) in self.elements().enumerate() {
            let w = self.volumes[e];
            for &v in conn {
                sum[v] += w * values[e];
                weight[v] += w;
            }
        }
        sum.iter().zip(&weight).map(|(s, w)| s / w).collect()
    }

    /// Element averages of a nodal field.
    pub fn nodal_to_element(&self, values: &[f64]) -> Vec<f64> {
        let nv = (self.dim + 1) as f64;
        self.elements()
            .map(|conn| conn.iter().map(|&v| values[v]).sum::<f64>() / nv)
            .collect()
    }

    /// Constant gradient of a P1 field on element `e`.
    pub fn element_gradient(&self, e: usize, values: &[f64]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for (&v, grad) in self.element(e).iter().zip(self.gradients(e)) {
            for k in 0..3 {
                g[k] += values[v] * grad[k];
            }
        }
        g
    }
}

/// `|supp N_i|`-weighted integral of a P1 field, `∫ u dΩ`.
pub fn integrate_nodal(mesh: &SimplexMesh, values: &[f64]) -> f64 {
    mesh.lumped_mass().iter().zip(values).map(|(m, u)| m * u).sum()
}

/// Total length/area of the facets carrying `tag`.
pub fn facet_tag_measure(mesh: &SimplexMesh, tag: &str) -> Result<f64> {
    Ok(mesh.tag_facets(tag)?.iter().map(|&f| mesh.facet_measure(f)).sum())
}

fn centroid(nodes: &[[f64; 3]], conn: &[usize]) -> [f64; 3] {
    let mut c = [0.0; 3];
    for &v in conn {
        for k in 0..3 {
            c[k] += nodes[v][k];
        }
    }
    let n = conn.len() as f64;
    c.map(|x| x / n)
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn signed_volume(dim: usize, nodes: &[[f64; 3]], conn: &[usize]) -> f64 {
    let x0 = nodes[conn[0]];
    let a = sub(&nodes[conn[1]], &x0);
    let b = sub(&nodes[conn[2]], &x0);
    if dim == 2 {
        0.5 * (a[0] * b[1] - a[1] * b[0])
    } else {
        let c = sub(&nodes[conn[3]], &x0);
        let ab = cross(&a, &b);
        (ab[0] * c[0] + ab[1] * c[1] + ab[2] * c[2]) / 6.0
    }
}

// Gradients of the barycentric coordinates: rows of J^{-T} with
// J = [x1 - x0, ..., xd - x0], and grad N0 = -sum of the others.
fn shape_gradients(dim: usize, nodes: &[[f64; 3]], conn: &[usize]) -> Vec<[f64; 3]> {
    let x0 = nodes[conn[0]];
    let mut out = vec![[0.0; 3]; dim + 1];
    if dim == 2 {
        let a = sub(&nodes[conn[1]], &x0);
        let b = sub(&nodes[conn[2]], &x0);
        let det = a[0] * b[1] - a[1] * b[0];
        out[1] = [b[1] / det, -b[0] / det, 0.0];
        out[2] = [-a[1] / det, a[0] / det, 0.0];
    } else {
        let a = sub(&nodes[conn[1]], &x0);
        let b = sub(&nodes[conn[2]], &x0);
        let c = sub(&nodes[conn[3]], &x0);
        let det = {
            let bc = cross(&b, &c);
            a[0] * bc[0] + a[1] * bc[1] + a[2] * bc[2]
        };
        out[1] = cross(&b, &c).map(|x| x / det);
        out[2] = cross(&c, &a).map(|x| x / det);
        out[3] = cross(&a, &b).map(|x| x / det);
    }
    let mut g0 = [0.0; 3];
    for g in &out[1..] {
        for k in 0..3 {
            g0[k] -= g[k];
        }
    }
    out[0] = g0;
    out
}
