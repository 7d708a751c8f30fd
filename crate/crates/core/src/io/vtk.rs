//! Legacy ASCII VTK unstructured grids of the deformed domain.

use std::io::Write;
use std::path::Path;

use super::IoError;
use crate::fem::TaylorHoodSpace;
use crate::linalg::{mul, Mat3};
use crate::map::SpaceTimeMap;
use crate::scalar::Real;

const VTK_TRIANGLE: u8 = 5;
const VTK_TETRA: u8 = 10;

/// `Q = (|W|^2 - |S|^2) / 2` with `S`, `W` the symmetric and antisymmetric
/// parts of a physical velocity gradient.
pub fn q_criterion<T: Real>(grad: &Mat3<T>) -> T {
    let mut q = T::zero();
    for i in 0..3 {
        for j in 0..3 {
            let s = (grad[i][j] + grad[j][i]) / T::two();
            let w = (grad[i][j] - grad[j][i]) / T::two();
            q += w * w - s * s;
        }
    }
    q / T::two()
}

/// Values written at the mesh vertices.
pub struct VertexFields<T> {
    pub positions: Vec<[T; 3]>,
    pub velocity: Vec<[T; 3]>,
    pub pressure: Vec<T>,
    pub q: Option<Vec<T>>,
}

/// Samples position, velocity, pressure and, optionally, the Q-criterion at
/// the vertices at time `t`. Q is averaged over the cells around a vertex.
pub fn vertex_fields<T: Real>(
    space: &TaylorHoodSpace<T>,
    map: &SpaceTimeMap<T>,
    t: T,
    u: &[T],
    p: &[T],
    with_q: bool,
) -> Result<VertexFields<T>, IoError> {
    let mesh = space.mesh();
    let d = space.dim();
    let nv = mesh.num_vertices();
    let refv = space.velocity_basis().nodes::<T>();
    let mut positions = vec![[T::zero(); 3]; nv];
    let mut done = vec![false; nv];
    let mut q = vec![T::zero(); nv];
    let mut count = vec![0usize; nv];
    for c in 0..mesh.num_cells() {
        let g = space.geometry(c);
        for (a, &v) in mesh.cell(c).iter().enumerate() {
            if done[v] && !with_q {
                continue;
            }
            let s = map.evaluate_in_cell(c, &g.to_physical(&refv[a]), t)?;
            if !done[v] {
                positions[v] = s.position;
                done[v] = true;
            }
            if with_q {
                let mut grad = mul(&space.velocity_gradient_in_cell(u, c, &refv[a]), &s.f_inv);
                if d == 2 {
                    grad[2] = [T::zero(); 3];
                    for row in grad.iter_mut() {
                        row[2] = T::zero();
                    }
                }
                q[v] += q_criterion(&grad);
                count[v] += 1;
            }
        }
    }
    let velocity = (0..nv)
        .map(|v| {
            let mut x = [T::zero(); 3];
            x[..d].copy_from_slice(&u[v * d..v * d + d]);
            x
        })
        .collect();
    let q = with_q.then(|| q.iter().zip(&count).map(|(s, &n)| *s / T::of_usize(n.max(1))).collect());
    Ok(VertexFields { positions, velocity, pressure: p[..nv].to_vec(), q })
}

/// Writes the P1 sub-mesh at deformed positions `xi(x, t)` with vertex
/// values of `u`, `p` and, if requested, the Q-criterion. Edge dofs are
/// not written.
pub fn write_vtk<T: Real>(
    path: &Path,
    space: &TaylorHoodSpace<T>,
    map: &SpaceTimeMap<T>,
    t: T,
    u: &[T],
    p: &[T],
    with_q: bool,
) -> Result<(), IoError> {
    let fields = vertex_fields(space, map, t, u, p, with_q)?;
    let io = |e| IoError::File { path: path.to_path_buf(), source: e };
    let mesh = space.mesh();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    let f = |x: T| x.to_f64_lossy();
    (|| -> std::io::Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "qlfem t={:e}", f(t))?;
        writeln!(w, "ASCII\nDATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", fields.positions.len())?;
        for x in &fields.positions {
            writeln!(w, "{:e} {:e} {:e}", f(x[0]), f(x[1]), f(x[2]))?;
        }
        let k = mesh.dim() + 1;
        writeln!(w, "CELLS {} {}", mesh.num_cells(), mesh.num_cells() * (k + 1))?;
        for c in 0..mesh.num_cells() {
            write!(w, "{k}")?;
            for v in mesh.cell(c) {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        let ty = if mesh.dim() == 3 { VTK_TETRA } else { VTK_TRIANGLE };
        writeln!(w, "CELL_TYPES {}", mesh.num_cells())?;
        for _ in 0..mesh.num_cells() {
            writeln!(w, "{ty}")?;
        }
        writeln!(w, "POINT_DATA {}", fields.positions.len())?;
        writeln!(w, "VECTORS u double")?;
        for v in &fields.velocity {
            writeln!(w, "{:e} {:e} {:e}", f(v[0]), f(v[1]), f(v[2]))?;
        }
        writeln!(w, "SCALARS p double 1\nLOOKUP_TABLE default")?;
        for v in &fields.pressure {
            writeln!(w, "{:e}", f(*v))?;
        }
        if let Some(q) = &fields.q {
            writeln!(w, "SCALARS q_criterion double 1\nLOOKUP_TABLE default")?;
            for v in q {
                writeln!(w, "{:e}", f(*v))?;
            }
        }
        w.flush()
    })()
    .map_err(io)
}

/// Contents of a legacy VTK file written by [`write_vtk`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VtkGrid {
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub vectors: Vec<(String, Vec<[f64; 3]>)>,
    pub scalars: Vec<(String, Vec<f64>)>,
}

impl VtkGrid {
    pub fn scalar(&self, name: &str) -> Option<&[f64]> {
        self.scalars.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn vector(&self, name: &str) -> Option<&[[f64; 3]]> {
        self.vectors.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

/// Reads the unstructured-grid subset of legacy ASCII VTK produced by
/// [`write_vtk`].
pub fn read_vtk(path: &Path) -> Result<VtkGrid, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::File { path: path.to_path_buf(), source: e })?;
    let err = |line: usize, m: &str| IoError::Parse { path: path.to_path_buf(), line, message: m.to_string() };
    let mut it = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let mut grid = VtkGrid::default();
    let mut n_points = 0;
    let nums = |line: usize, l: &str| -> Result<Vec<f64>, IoError> {
        l.split_whitespace().map(|s| s.parse::<f64>().map_err(|_| err(line, "invalid number"))).collect()
    };
    while let Some((ln, l)) = it.next() {
        let words: Vec<&str> = l.split_whitespace().collect();
        match words.first().copied() {
            Some("POINTS") => {
                n_points = words.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| err(ln, "bad POINTS"))?;
                for _ in 0..n_points {
                    let (ln, l) = it.next().ok_or_else(|| err(ln, "truncated POINTS"))?;
                    let v = nums(ln, l)?;
                    if v.len() != 3 {
                        return Err(err(ln, "expected 3 coordinates"));
                    }
                    grid.points.push([v[0], v[1], v[2]]);
                }
            }
            Some("CELLS") => {
                let n: usize = words.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| err(ln, "bad CELLS"))?;
                for _ in 0..n {
                    let (ln, l) = it.next().ok_or_else(|| err(ln, "truncated CELLS"))?;
                    let v: Vec<usize> = nums(ln, l)?.iter().map(|x| *x as usize).collect();
                    if v.is_empty() || v.len() != v[0] + 1 {
                        return Err(err(ln, "malformed cell"));
                    }
                    grid.cells.push(v[1..].to_vec());
                }
            }
            Some("CELL_TYPES") => {
                let n: usize = words.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| err(ln, "bad CELL_TYPES"))?;
                for _ in 0..n {
                    let (ln, l) = it.next().ok_or_else(|| err(ln, "truncated CELL_TYPES"))?;
                    grid.cell_types.push(l.parse().map_err(|_| err(ln, "bad cell type"))?);
                }
            }
            Some("VECTORS") => {
                let name = words.get(1).ok_or_else(|| err(ln, "unnamed VECTORS"))?.to_string();
                let mut v = Vec::with_capacity(n_points);
                for _ in 0..n_points {
                    let (ln, l) = it.next().ok_or_else(|| err(ln, "truncated VECTORS"))?;
                    let x = nums(ln, l)?;
                    if x.len() != 3 {
                        return Err(err(ln, "expected 3 components"));
                    }
                    v.push([x[0], x[1], x[2]]);
                }
                grid.vectors.push((name, v));
            }
            Some("SCALARS") => {
                let name = words.get(1).ok_or_else(|| err(ln, "unnamed SCALARS"))?.to_string();
                let (ln, l) = it.next().ok_or_else(|| err(ln, "missing LOOKUP_TABLE"))?;
                if !l.starts_with("LOOKUP_TABLE") {
                    return Err(err(ln, "expected LOOKUP_TABLE"));
                }
                let mut v = Vec::with_capacity(n_points);
                for _ in 0..n_points {
                    let (ln, l) = it.next().ok_or_else(|| err(ln, "truncated SCALARS"))?;
                    v.push(l.parse().map_err(|_| err(ln, "invalid number"))?);
                }
                grid.scalars.push((name, v));
            }
            _ => {}
        }
    }
    Ok(grid)
}
