//! Structured generators for boxes and the axisymmetric tube.

use super::{build_connectivity, raw_with_classified_boundary, BoundaryLabel, MeshError, SimplicialMesh};
use crate::scalar::{Real, Vec3};

/// Face labels of an axis-aligned box, in the order
/// `[x_min, x_max, y_min, y_max, z_min, z_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxLabels(pub [BoundaryLabel; 6]);

impl BoxLabels {
    pub fn uniform(label: BoundaryLabel) -> Self {
        BoxLabels([label; 6])
    }
}

impl Default for BoxLabels {
    fn default() -> Self {
        BoxLabels::uniform(BoundaryLabel::NoSlip)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubeLabels {
    pub lateral: BoundaryLabel,
    pub inlet: BoundaryLabel,
    pub outlet: BoundaryLabel,
}

impl Default for TubeLabels {
    fn default() -> Self {
        TubeLabels { lateral: BoundaryLabel::NoSlip, inlet: BoundaryLabel::NoSlip, outlet: BoundaryLabel::Neumann(0) }
    }
}

/// Kuhn (Freudenthal) split of a grid cell into simplices. Every simplex
/// runs along the main diagonal, so neighbouring cells share consistent
/// face diagonals.
fn kuhn_cells(dim: usize, dims: [usize; 3]) -> Vec<Vec<usize>> {
    let (nx, ny) = (dims[0], dims[1]);
    let idx = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let perms: &[[usize; 3]] = if dim == 2 {
        &[[0, 1, 2], [1, 0, 2]]
    } else {
        &[[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]]
    };
    let nz = if dim == 2 { 1 } else { dims[2] };
    let mut cells = Vec::with_capacity(nx * ny * nz * perms.len());
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                for p in perms {
                    let mut pos = [i, j, k];
                    let mut c = vec![idx(pos[0], pos[1], pos[2])];
                    for &axis in p.iter().take(dim) {
                        pos[axis] += 1;
                        c.push(idx(pos[0], pos[1], pos[2]));
                    }
                    cells.push(c);
                }
            }
        }
    }
    cells
}

/// Structured box mesh: two triangles per square, six tetrahedra per cube.
pub fn generate_box<T: Real>(
    dim: usize,
    divisions: &[usize],
    extents: &[(T, T)],
    labels: BoxLabels,
) -> Result<SimplicialMesh<T>, MeshError> {
    if dim != 2 && dim != 3 {
        return Err(MeshError::Dimension(dim));
    }
    if divisions.len() != dim || extents.len() != dim {
        return Err(MeshError::Parameter(format!("expected {dim} divisions and extents")));
    }
    if divisions.iter().any(|&n| n == 0) {
        return Err(MeshError::Parameter("divisions must be at least 1".into()));
    }
    for &(a, b) in extents {
        if !(b > a) {
            return Err(MeshError::Parameter("extent upper bound must exceed lower bound".into()));
        }
    }
    let mut dims = [1usize; 3];
    dims[..dim].copy_from_slice(divisions);
    let nzv = if dim == 2 { 1 } else { dims[2] + 1 };
    let coord = |axis: usize, i: usize| {
        let (a, b) = extents[axis];
        if i == dims[axis] {
            b
        } else {
            a + (b - a) * T::of_usize(i) / T::of_usize(dims[axis])
        }
    };
    let mut vertices = Vec::with_capacity((dims[0] + 1) * (dims[1] + 1) * nzv);
    for k in 0..nzv {
        for j in 0..=dims[1] {
            for i in 0..=dims[0] {
                let z = if dim == 3 { coord(2, k) } else { T::zero() };
                vertices.push([coord(0, i), coord(1, j), z]);
            }
        }
    }
    let cells = kuhn_cells(dim, dims);
    let bounds: Vec<(T, T)> = extents.to_vec();
    let raw = raw_with_classified_boundary(dim, vertices, cells, |pts: &[Vec3<T>]| {
        for axis in 0..dim {
            for (side, bound) in [bounds[axis].0, bounds[axis].1].into_iter().enumerate() {
                if pts.iter().all(|p| p[axis] == bound) {
                    return labels.0[2 * axis + side];
                }
            }
        }
        unreachable!("boundary face off the box surface")
    });
    build_connectivity(raw)
}

/// Elliptical square-to-disk map of `[-1, 1]^2` onto the unit disk; the
/// square boundary lands exactly on the unit circle.
pub fn square_to_disk<T: Real>(a: T, b: T) -> (T, T) {
    let half = T::half();
    (a * (T::one() - half * b * b).sqrt(), b * (T::one() - half * a * a).sqrt())
}

/// Cylinder along the `y` axis with cross-section radius `radius(y)`.
///
/// `radial_divisions` is the number of cells per side of the square
/// cross-section grid, `axial_divisions` the number of layers along `y`.
/// The lateral surface is polyhedral: boundary vertices lie exactly on the
/// curved surface.
pub fn generate_tube<T: Real>(
    axial_divisions: usize,
    radial_divisions: usize,
    radius: impl Fn(T) -> T,
    y_range: (T, T),
    labels: TubeLabels,
) -> Result<SimplicialMesh<T>, MeshError> {
    if axial_divisions == 0 || radial_divisions == 0 {
        return Err(MeshError::Parameter("tube divisions must be at least 1".into()));
    }
    let (y0, y1) = y_range;
    if !(y1 > y0) {
        return Err(MeshError::Parameter("empty axial range".into()));
    }
    let n = radial_divisions;
    let dims = [n, axial_divisions, n];
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1) * (axial_divisions + 1));
    let square = |i: usize| {
        if 2 * i == n {
            T::zero()
        } else {
            -T::one() + T::two() * T::of_usize(i) / T::of_usize(n)
        }
    };
    for k in 0..=n {
        for j in 0..=axial_divisions {
            let y = if j == axial_divisions {
                y1
            } else {
                y0 + (y1 - y0) * T::of_usize(j) / T::of_usize(axial_divisions)
            };
            let r = radius(y);
            if !(r > T::zero()) {
                return Err(MeshError::Parameter(format!("non-positive radius at y = {y}")));
            }
            for i in 0..=n {
                let (u, v) = square_to_disk(square(i), square(k));
                vertices.push([r * u, y, r * v]);
            }
        }
    }
    let cells = kuhn_cells(3, dims);
    let raw = raw_with_classified_boundary(3, vertices, cells, |pts: &[Vec3<T>]| {
        if pts.iter().all(|p| p[1] == y1) {
            labels.outlet
        } else if pts.iter().all(|p| p[1] == y0) {
            labels.inlet
        } else {
            labels.lateral
        }
    });
    build_connectivity(raw)
}
