//! Simplicial reference-domain meshes.
//!
//! The mesh lives in the fixed reference domain for the whole simulation;
//! domain motion is carried entirely by the space-time map.

mod generate;
mod refine;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::linalg::{cross, det, norm, vsub, Mat3};
use crate::scalar::{Real, Vec3};

pub use generate::{generate_box, generate_tube, square_to_disk, BoxLabels, TubeLabels};
pub use refine::refine_uniform;

/// Local edges of a triangle, as pairs of local vertex numbers.
pub const TRI_EDGES: [[usize; 2]; 3] = [[0, 1], [1, 2], [0, 2]];
/// Local edges of a tetrahedron.
pub const TET_EDGES: [[usize; 2]; 6] = [[0, 1], [1, 2], [0, 2], [0, 3], [1, 3], [2, 3]];

pub fn local_edges(dim: usize) -> &'static [[usize; 2]] {
    if dim == 2 {
        &TRI_EDGES
    } else {
        &TET_EDGES
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryLabel {
    NoSlip,
    Dirichlet(u32),
    Neumann(u32),
}

impl BoundaryLabel {
    /// Precedence for nodes shared by differently labeled facets:
    /// no-slip beats Dirichlet beats Neumann.
    pub fn precedence(self) -> u8 {
        match self {
            BoundaryLabel::NoSlip => 3,
            BoundaryLabel::Dirichlet(_) => 2,
            BoundaryLabel::Neumann(_) => 1,
        }
    }

    pub fn is_neumann(self) -> bool {
        matches!(self, BoundaryLabel::Neumann(_))
    }
}

impl fmt::Display for BoundaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryLabel::NoSlip => f.write_str("noslip"),
            BoundaryLabel::Dirichlet(p) => write!(f, "dirichlet:{p}"),
            BoundaryLabel::Neumann(p) => write!(f, "neumann:{p}"),
        }
    }
}

impl FromStr for BoundaryLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "noslip" {
            return Ok(BoundaryLabel::NoSlip);
        }
        let (kind, patch) = s.split_once(':').ok_or_else(|| format!("invalid boundary label '{s}'"))?;
        let patch: u32 = patch.trim().parse().map_err(|_| format!("invalid patch id in '{s}'"))?;
        match kind.trim() {
            "dirichlet" => Ok(BoundaryLabel::Dirichlet(patch)),
            "neumann" => Ok(BoundaryLabel::Neumann(patch)),
            _ => Err(format!("invalid boundary label '{s}'")),
        }
    }
}

impl serde::Serialize for BoundaryLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for BoundaryLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("unsupported dimension {0}")]
    Dimension(usize),
    #[error("cell {cell} has {found} vertices, expected {expected}")]
    CellArity { cell: usize, expected: usize, found: usize },
    #[error("facet {facet} has {found} vertices, expected {expected}")]
    FacetArity { facet: usize, expected: usize, found: usize },
    #[error("vertex index {index} out of range ({count} vertices) in {context}")]
    IndexOutOfRange { index: usize, count: usize, context: String },
    #[error("cell {0} has zero volume")]
    ZeroVolume(usize),
    #[error("boundary facet {0:?} is not a face of any cell")]
    DanglingFacet(Vec<usize>),
    #[error("labeled facet {0:?} is an interior face")]
    InteriorFacet(Vec<usize>),
    #[error("facet {0:?} labeled twice")]
    DuplicateFacet(Vec<usize>),
    #[error("face {0:?} is shared by three or more cells")]
    NonManifold(Vec<usize>),
    #[error("boundary face {0:?} carries no label")]
    UnlabeledBoundary(Vec<usize>),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// Unvalidated mesh arrays, as produced by generators and file readers.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMesh<T> {
    pub dim: usize,
    pub vertices: Vec<Vec3<T>>,
    pub cells: Vec<Vec<usize>>,
    pub facets: Vec<(Vec<usize>, BoundaryLabel)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    /// Vertex indices; only the first `dim` entries are used.
    pub vertices: [usize; 3],
    pub label: BoundaryLabel,
    /// The unique cell owning this facet.
    pub cell: usize,
    /// Local number of the facet in `cell`, equal to the opposite local vertex.
    pub local_face: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialMesh<T> {
    dim: usize,
    vertices: Vec<Vec3<T>>,
    /// Positively oriented cells; only the first `dim + 1` entries are used.
    cells: Vec<[usize; 4]>,
    facets: Vec<BoundaryFacet>,
    /// Sorted undirected edges, `edge[0] < edge[1]`.
    edges: Vec<[usize; 2]>,
    /// Global edge index per local edge (see [`local_edges`]).
    cell_edges: Vec<[usize; 6]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshQuality<T> {
    pub h_max: T,
    pub h_min: T,
    pub shape_regularity: T,
    pub cell_count: usize,
    pub vertex_count: usize,
    pub edge_count: usize,
}

fn sorted_key(v: &[usize]) -> Vec<usize> {
    let mut k = v.to_vec();
    k.sort_unstable();
    k
}

/// Signed measure of a simplex given its vertex coordinates.
pub fn signed_volume<T: Real>(dim: usize, p: &[Vec3<T>]) -> T {
    if dim == 2 {
        let a = vsub(&p[1], &p[0]);
        let b = vsub(&p[2], &p[0]);
        (a[0] * b[1] - a[1] * b[0]) * T::half()
    } else {
        let m: Mat3<T> = [vsub(&p[1], &p[0]), vsub(&p[2], &p[0]), vsub(&p[3], &p[0])];
        det(&m) / T::of(6.0)
    }
}

/// Measure of a facet (segment length in 2D, triangle area in 3D).
pub fn facet_measure<T: Real>(dim: usize, p: &[Vec3<T>]) -> T {
    if dim == 2 {
        norm(&vsub(&p[1], &p[0]))
    } else {
        norm(&cross(&vsub(&p[1], &p[0]), &vsub(&p[2], &p[0]))) * T::half()
    }
}

/// Builds a validated mesh from raw arrays.
pub fn build_connectivity<T: Real>(raw: RawMesh<T>) -> Result<SimplicialMesh<T>, MeshError> {
    let RawMesh { dim, vertices, cells: raw_cells, facets: raw_facets } = raw;
    if dim != 2 && dim != 3 {
        return Err(MeshError::Dimension(dim));
    }
    let nv = vertices.len();
    let nloc = dim + 1;

    let mut cells = Vec::with_capacity(raw_cells.len());
    for (ci, c) in raw_cells.iter().enumerate() {
        if c.len() != nloc {
            return Err(MeshError::CellArity { cell: ci, expected: nloc, found: c.len() });
        }
        for &i in c {
            if i >= nv {
                return Err(MeshError::IndexOutOfRange { index: i, count: nv, context: format!("cell {ci}") });
            }
        }
        let mut cell = [0usize; 4];
        cell[..nloc].copy_from_slice(c);
        let pts: Vec<Vec3<T>> = c.iter().map(|&i| vertices[i]).collect();
        let vol = signed_volume(dim, &pts);
        let mut diam = T::zero();
        for e in local_edges(dim) {
            diam = diam.max(norm(&vsub(&pts[e[0]], &pts[e[1]])));
        }
        let scale = diam.powi(dim as i32);
        if !(vol.abs() > T::of(1e-12) * scale) {
            return Err(MeshError::ZeroVolume(ci));
        }
        if vol < T::zero() {
            cell.swap(0, 1);
        }
        cells.push(cell);
    }

    let mut face_owner: HashMap<Vec<usize>, Vec<(usize, usize)>> = HashMap::new();
    for (ci, c) in cells.iter().enumerate() {
        for lf in 0..nloc {
            let face: Vec<usize> = (0..nloc).filter(|&j| j != lf).map(|j| c[j]).collect();
            face_owner.entry(sorted_key(&face)).or_default().push((ci, lf));
        }
    }
    let mut nonmanifold: Vec<&Vec<usize>> = face_owner.iter().filter(|(_, o)| o.len() > 2).map(|(k, _)| k).collect();
    nonmanifold.sort();
    if let Some(k) = nonmanifold.first() {
        return Err(MeshError::NonManifold((*k).clone()));
    }

    let mut seen = BTreeSet::new();
    let mut facets = Vec::with_capacity(raw_facets.len());
    for (fi, (f, label)) in raw_facets.iter().enumerate() {
        if f.len() != dim {
            return Err(MeshError::FacetArity { facet: fi, expected: dim, found: f.len() });
        }
        for &i in f {
            if i >= nv {
                return Err(MeshError::IndexOutOfRange { index: i, count: nv, context: format!("facet {fi}") });
            }
        }
        let key = sorted_key(f);
        if !seen.insert(key.clone()) {
            return Err(MeshError::DuplicateFacet(f.clone()));
        }
        match face_owner.get(&key) {
            None => return Err(MeshError::DanglingFacet(f.clone())),
            Some(o) if o.len() != 1 => return Err(MeshError::InteriorFacet(f.clone())),
            Some(o) => {
                let mut v = [0usize; 3];
                v[..dim].copy_from_slice(f);
                facets.push(BoundaryFacet { vertices: v, label: *label, cell: o[0].0, local_face: o[0].1 });
            }
        }
    }
    let mut unlabeled: Vec<&Vec<usize>> =
        face_owner.iter().filter(|(k, o)| o.len() == 1 && !seen.contains(*k)).map(|(k, _)| k).collect();
    unlabeled.sort();
    if let Some(k) = unlabeled.first() {
        return Err(MeshError::UnlabeledBoundary((*k).clone()));
    }

    let mut edge_set = BTreeSet::new();
    for c in &cells {
        for e in local_edges(dim) {
            let (a, b) = (c[e[0]], c[e[1]]);
            edge_set.insert([a.min(b), a.max(b)]);
        }
    }
    let edges: Vec<[usize; 2]> = edge_set.into_iter().collect();
    let edge_index: HashMap<[usize; 2], usize> = edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let cell_edges = cells
        .iter()
        .map(|c| {
            let mut ce = [usize::MAX; 6];
            for (k, e) in local_edges(dim).iter().enumerate() {
                let (a, b) = (c[e[0]], c[e[1]]);
                ce[k] = edge_index[&[a.min(b), a.max(b)]];
            }
            ce
        })
        .collect();

    Ok(SimplicialMesh { dim, vertices, cells, facets, edges, cell_edges })
}

impl<T: Real> SimplicialMesh<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Vec3<T> {
        self.vertices[i]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Vertex indices of cell `c` (length `dim + 1`).
    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c][..self.dim + 1]
    }

    pub fn cell_points(&self, c: usize) -> Vec<Vec3<T>> {
        self.cell(c).iter().map(|&i| self.vertices[i]).collect()
    }

    /// Global edge indices of cell `c` in local edge order.
    pub fn cell_edges(&self, c: usize) -> &[usize] {
        let n = if self.dim == 2 { 3 } else { 6 };
        &self.cell_edges[c][..n]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge_midpoint(&self, e: usize) -> Vec3<T> {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [(pa[0] + pb[0]) * T::half(), (pa[1] + pb[1]) * T::half(), (pa[2] + pb[2]) * T::half()]
    }

    pub fn facets(&self) -> &[BoundaryFacet] {
        &self.facets
    }

    pub fn facet_vertices(&self, f: usize) -> &[usize] {
        &self.facets[f].vertices[..self.dim]
    }

    /// Distinct boundary labels present in the mesh, sorted.
    pub fn boundary_labels(&self) -> Vec<BoundaryLabel> {
        let set: BTreeSet<BoundaryLabel> = self.facets.iter().map(|f| f.label).collect();
        set.into_iter().collect()
    }

    pub fn has_neumann(&self) -> bool {
        self.facets.iter().any(|f| f.label.is_neumann())
    }

    pub fn cell_volume(&self, c: usize) -> T {
        signed_volume(self.dim, &self.cell_points(c))
    }

    pub fn total_volume(&self) -> T {
        (0..self.num_cells()).map(|c| self.cell_volume(c)).sum()
    }

    /// Cell diameter, i.e. its longest edge.
    pub fn cell_diameter(&self, c: usize) -> T {
        let p = self.cell_points(c);
        local_edges(self.dim).iter().map(|e| norm(&vsub(&p[e[0]], &p[e[1]]))).fold(T::zero(), T::max)
    }

    pub fn facet_area(&self, f: usize) -> T {
        let p: Vec<Vec3<T>> = self.facet_vertices(f).iter().map(|&i| self.vertices[i]).collect();
        facet_measure(self.dim, &p)
    }

    /// Outward unit normal of boundary facet `f` in reference coordinates.
    pub fn facet_normal(&self, f: usize) -> Vec3<T> {
        let fv = self.facet_vertices(f);
        let p: Vec<Vec3<T>> = fv.iter().map(|&i| self.vertices[i]).collect();
        let mut n = if self.dim == 2 {
            let t = vsub(&p[1], &p[0]);
            [t[1], -t[0], T::zero()]
        } else {
            cross(&vsub(&p[1], &p[0]), &vsub(&p[2], &p[0]))
        };
        let facet = &self.facets[f];
        let opposite = self.vertices[self.cells[facet.cell][facet.local_face]];
        if crate::linalg::dot(&n, &vsub(&opposite, &p[0])) > T::zero() {
            n = [-n[0], -n[1], -n[2]];
        }
        let l = norm(&n);
        [n[0] / l, n[1] / l, n[2] / l]
    }

    pub fn quality(&self) -> MeshQuality<T> {
        let mut h_max = T::zero();
        let mut h_min = T::infinity();
        let mut shape = T::zero();
        let nloc = self.dim + 1;
        for c in 0..self.num_cells() {
            let p = self.cell_points(c);
            let diam = self.cell_diameter(c);
            h_max = h_max.max(diam);
            h_min = h_min.min(diam);
            let vol = signed_volume(self.dim, &p).abs();
            let mut surface = T::zero();
            for lf in 0..nloc {
                let face: Vec<Vec3<T>> = (0..nloc).filter(|&j| j != lf).map(|j| p[j]).collect();
                surface += facet_measure(self.dim, &face);
            }
            let inradius = T::of_usize(self.dim) * vol / surface;
            shape = shape.max(diam / (T::two() * inradius));
        }
        MeshQuality {
            h_max,
            h_min,
            shape_regularity: shape,
            cell_count: self.num_cells(),
            vertex_count: self.num_vertices(),
            edge_count: self.num_edges(),
        }
    }

    /// Raw arrays that rebuild this mesh.
    pub fn to_raw(&self) -> RawMesh<T> {
        RawMesh {
            dim: self.dim,
            vertices: self.vertices.clone(),
            cells: (0..self.num_cells()).map(|c| self.cell(c).to_vec()).collect(),
            facets: (0..self.facets.len()).map(|f| (self.facet_vertices(f).to_vec(), self.facets[f].label)).collect(),
        }
    }

    /// Barycentric coordinates of `x` with respect to cell `c`.
    pub fn barycentric(&self, c: usize, x: &Vec3<T>) -> Vec<T> {
        let p = self.cell_points(c);
        let g = crate::fem::geometry::CellGeometry::new(self.dim, &p);
        let xr = g.to_reference(x);
        let mut l = vec![T::one() - (0..self.dim).map(|i| xr[i]).sum::<T>()];
        l.extend((0..self.dim).map(|i| xr[i]));
        l
    }

    /// First cell containing `x` (up to a small tolerance), by linear search.
    pub fn locate(&self, x: &Vec3<T>) -> Option<usize> {
        let tol = T::of(-1e-10);
        (0..self.num_cells()).find(|&c| self.barycentric(c, x).iter().all(|&l| l >= tol))
    }
}

/// Labels the boundary faces of a cell list with `classify` and assembles
/// raw arrays.
pub(crate) fn raw_with_classified_boundary<T: Real>(
    dim: usize,
    vertices: Vec<Vec3<T>>,
    cells: Vec<Vec<usize>>,
    classify: impl Fn(&[Vec3<T>]) -> BoundaryLabel,
) -> RawMesh<T> {
    let nloc = dim + 1;
    let mut count: HashMap<Vec<usize>, (usize, Vec<usize>)> = HashMap::new();
    for c in &cells {
        for lf in 0..nloc {
            let face: Vec<usize> = (0..nloc).filter(|&j| j != lf).map(|j| c[j]).collect();
            let e = count.entry(sorted_key(&face)).or_insert((0, face));
            e.0 += 1;
        }
    }
    let mut boundary: Vec<Vec<usize>> = count.into_values().filter(|(n, _)| *n == 1).map(|(_, f)| f).collect();
    boundary.sort_by_key(|f| sorted_key(f));
    let facets = boundary
        .into_iter()
        .map(|f| {
            let pts: Vec<Vec3<T>> = f.iter().map(|&i| vertices[i]).collect();
            let label = classify(&pts);
            (f, label)
        })
        .collect();
    RawMesh { dim, vertices, cells, facets }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> RawMesh<f64> {
        RawMesh {
            dim: 2,
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
            cells: vec![vec![0, 1, 2], vec![0, 2, 3]],
            facets: vec![
                (vec![0, 1], BoundaryLabel::NoSlip),
                (vec![1, 2], BoundaryLabel::Neumann(0)),
                (vec![2, 3], BoundaryLabel::NoSlip),
                (vec![3, 0], BoundaryLabel::Dirichlet(1)),
            ],
        }
    }

    fn unit_tet() -> RawMesh<f64> {
        RawMesh {
            dim: 3,
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            cells: vec![vec![0, 1, 2, 3]],
            facets: vec![
                (vec![1, 2, 3], BoundaryLabel::NoSlip),
                (vec![0, 2, 3], BoundaryLabel::NoSlip),
                (vec![0, 1, 3], BoundaryLabel::NoSlip),
                (vec![0, 1, 2], BoundaryLabel::NoSlip),
            ],
        }
    }

    #[test]
    fn unit_tet_has_six_edges() {
        let m = build_connectivity(unit_tet()).unwrap();
        assert_eq!(m.num_edges(), 6);
        assert!((m.total_volume() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn square_has_five_edges_four_facets() {
        let m = build_connectivity(unit_square()).unwrap();
        assert_eq!(m.num_edges(), 5);
        assert_eq!(m.facets().len(), 4);
        assert!(m.has_neumann());
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let mut raw = unit_square();
        raw.cells[1][2] = 7;
        assert!(matches!(build_connectivity(raw), Err(MeshError::IndexOutOfRange { index: 7, .. })));
    }

    #[test]
    fn negative_orientation_is_fixed() {
        let mut raw = unit_tet();
        raw.cells[0] = vec![1, 0, 2, 3];
        let m = build_connectivity(raw).unwrap();
        assert!(m.cell_volume(0) > 0.0);
    }

    #[test]
    fn structural_errors() {
        let mut raw = unit_square();
        raw.facets.push((vec![0, 2], BoundaryLabel::NoSlip));
        assert!(matches!(build_connectivity(raw), Err(MeshError::InteriorFacet(_))));

        let mut raw = unit_square();
        raw.vertices.push([2.0, 2.0, 0.0]);
        raw.facets.push((vec![2, 4], BoundaryLabel::NoSlip));
        assert!(matches!(build_connectivity(raw), Err(MeshError::DanglingFacet(_))));

        let mut raw = unit_square();
        raw.facets.pop();
        assert!(matches!(build_connectivity(raw), Err(MeshError::UnlabeledBoundary(_))));

        let mut raw = unit_square();
        raw.vertices.push([0.5, -1.0, 0.0]);
        raw.cells.push(vec![0, 1, 4]);
        raw.cells.push(vec![0, 4, 1]);
        assert!(matches!(build_connectivity(raw), Err(MeshError::NonManifold(_))));

        let mut raw = unit_square();
        raw.vertices[2] = [0.5, 0.5, 0.0];
        raw.vertices[3] = [0.0, 1.0, 0.0];
        raw.cells[0] = vec![0, 2, 0];
        assert!(build_connectivity(raw).is_err());
    }

    #[test]
    fn zero_volume_cell() {
        let raw = RawMesh {
            dim: 2,
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
            cells: vec![vec![0, 1, 2]],
            facets: vec![],
        };
        assert_eq!(build_connectivity(raw).unwrap_err(), MeshError::ZeroVolume(0));
    }

    #[test]
    fn rebuild_is_idempotent() {
        let m = build_connectivity(unit_square()).unwrap();
        let again = build_connectivity(m.to_raw()).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn outward_normals() {
        let m = build_connectivity(unit_square()).unwrap();
        let n = m.facet_normal(0);
        assert!((n[1] + 1.0).abs() < 1e-15);
        let n = m.facet_normal(1);
        assert!((n[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn label_round_trip_text() {
        for l in [BoundaryLabel::NoSlip, BoundaryLabel::Dirichlet(3), BoundaryLabel::Neumann(0)] {
            assert_eq!(l.to_string().parse::<BoundaryLabel>().unwrap(), l);
        }
        assert!("wall".parse::<BoundaryLabel>().is_err());
    }

    #[test]
    fn regular_simplices_have_minimal_shape_ratio() {
        let s3 = 3f64.sqrt();
        let raw = RawMesh {
            dim: 2,
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, s3 / 2.0, 0.0]],
            cells: vec![vec![0, 1, 2]],
            facets: vec![
                (vec![0, 1], BoundaryLabel::NoSlip),
                (vec![1, 2], BoundaryLabel::NoSlip),
                (vec![2, 0], BoundaryLabel::NoSlip),
            ],
        };
        let q = build_connectivity(raw).unwrap().quality();
        assert!((q.shape_regularity - s3).abs() < 1e-12);
    }
}
