//! Maps given as a time series of nodal positions of the reference mesh.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use super::MapError;
use crate::fem::geometry::CellGeometry;
use crate::linalg::{identity, mul, Mat3};
use crate::mesh::SimplicialMesh;
use crate::scalar::{Real, Vec3};

/// Frames of vertex positions; positions are linear in time between frames
/// and the map is the P1 interpolant of the positions in space.
#[derive(Debug, Clone)]
pub struct MeshSequence<T> {
    mesh: Arc<SimplicialMesh<T>>,
    times: Vec<T>,
    frames: Vec<Vec<Vec3<T>>>,
    geometry: Vec<CellGeometry<T>>,
}

impl<T: Real> MeshSequence<T> {
    pub fn new(mesh: Arc<SimplicialMesh<T>>, times: Vec<T>, frames: Vec<Vec<Vec3<T>>>) -> Result<Self, MapError> {
        if times.len() < 2 || times.len() != frames.len() {
            return Err(MapError::Frames(format!(
                "need at least two frames with one time each (got {} times, {} frames)",
                times.len(),
                frames.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(MapError::Frames("frame times must be strictly increasing".into()));
        }
        let nv = mesh.num_vertices();
        if let Some((k, f)) = frames.iter().enumerate().find(|(_, f)| f.len() != nv) {
            return Err(MapError::Frames(format!("frame {k} has {} nodes, mesh has {nv}", f.len())));
        }
        let geometry = (0..mesh.num_cells()).map(|c| CellGeometry::new(mesh.dim(), &mesh.cell_points(c))).collect();
        Ok(MeshSequence { mesh, times, frames, geometry })
    }

    pub fn mesh(&self) -> &SimplicialMesh<T> {
        &self.mesh
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    /// Interval `i` with `t_i < t <= t_{i+1}` (the first interval for
    /// `t <= t_0`) and the interpolation weight within it.
    fn interval(&self, t: T) -> Result<(usize, T), MapError> {
        let (first, last) = (self.times[0], *self.times.last().unwrap());
        let tol = T::of(1e-12) * (last - first);
        if t < first - tol || t > last + tol {
            return Err(MapError::TimeOutOfRange {
                time: t.to_f64_lossy(),
                first: first.to_f64_lossy(),
                last: last.to_f64_lossy(),
            });
        }
        let n = self.times.len();
        let i = self.times[1..n - 1].iter().take_while(|&&ti| ti < t).count();
        let (a, b) = (self.times[i], self.times[i + 1]);
        let theta = if t >= b { T::one() } else { ((t - a) / (b - a)).max(T::zero()) };
        Ok((i, theta))
    }

    /// Positions of all mesh vertices at time `t`.
    pub fn nodal_positions(&self, t: T) -> Result<Vec<Vec3<T>>, MapError> {
        let (i, th) = self.interval(t)?;
        let (a, b) = (&self.frames[i], &self.frames[i + 1]);
        Ok(a.iter().zip(b).map(|(p, q)| std::array::from_fn(|k| (T::one() - th) * p[k] + th * q[k])).collect())
    }

    /// Position, gradient and velocity of the map at `x` in `cell`.
    pub(super) fn evaluate_in_cell(&self, cell: usize, x: &Vec3<T>, t: T) -> Result<(Vec3<T>, Mat3<T>, Vec3<T>), MapError> {
        let (i, th) = self.interval(t)?;
        let dt = self.times[i + 1] - self.times[i];
        let d = self.mesh.dim();
        let g = &self.geometry[cell];
        let xr = g.to_reference(x);
        let mut lam = [T::zero(); 4];
        lam[0] = T::one() - (0..d).map(|k| xr[k]).sum::<T>();
        lam[1..=d].copy_from_slice(&xr[..d]);

        let verts = self.mesh.cell(cell);
        let mut pos = [T::zero(); 3];
        let mut vel = [T::zero(); 3];
        let mut p = [[T::zero(); 3]; 4];
        for (a, &v) in verts.iter().enumerate() {
            let (x0, x1) = (self.frames[i][v], self.frames[i + 1][v]);
            for k in 0..3 {
                p[a][k] = (T::one() - th) * x0[k] + th * x1[k];
                pos[k] += lam[a] * p[a][k];
                vel[k] += lam[a] * (x1[k] - x0[k]) / dt;
            }
        }
        let mut e = identity();
        for col in 0..d {
            for row in 0..d {
                e[row][col] = p[col + 1][row] - p[0][row];
            }
        }
        Ok((pos, mul(&e, &g.jacobian_inv), vel))
    }
}

/// Reads one frame file per regular file in `dir` (sorted by file name):
/// the frame time on the first line, then one `x y z` line per mesh node.
pub fn read_frame_directory<T: Real>(dir: &Path, mesh: Arc<SimplicialMesh<T>>) -> Result<MeshSequence<T>, MapError> {
    let err = |m: String| MapError::Frames(m);
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| err(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let mut times = Vec::with_capacity(files.len());
    let mut frames = Vec::with_capacity(files.len());
    for path in &files {
        let text = std::fs::read_to_string(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| err(format!("{}: empty frame file", path.display())))?;
        let t: f64 = first.trim().parse().map_err(|_| err(format!("{}:1: invalid frame time", path.display())))?;
        let mut pts = Vec::with_capacity(mesh.num_vertices());
        for (ln, line) in lines {
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse())
                .collect::<Result<_, _>>()
                .map_err(|_| err(format!("{}:{}: invalid coordinates", path.display(), ln + 1)))?;
            if vals.len() < mesh.dim() || vals.len() > 3 {
                return Err(err(format!("{}:{}: expected 3 coordinates", path.display(), ln + 1)));
            }
            let z = if mesh.dim() == 3 { T::of(vals[2]) } else { T::zero() };
            pts.push([T::of(vals[0]), T::of(vals[1]), z]);
        }
        times.push(T::of(t));
        frames.push(pts);
    }
    MeshSequence::new(mesh, times, frames)
}

/// Writes a frame file in the format read by [`read_frame_directory`].
pub fn write_frame<T: Real>(path: &Path, time: T, positions: &[Vec3<T>]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{:e}", time.to_f64_lossy())?;
    for p in positions {
        writeln!(w, "{:e} {:e} {:e}", p[0].to_f64_lossy(), p[1].to_f64_lossy(), p[2].to_f64_lossy())?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::SpaceTimeMap;
    use crate::mesh::{generate_box, BoxLabels};

    fn scaled_frames(mesh: &SimplicialMesh<f64>, times: &[f64]) -> Vec<Vec<Vec3<f64>>> {
        times
            .iter()
            .map(|t| mesh.vertices().iter().map(|p| [p[0] * (1.0 + 0.5 * t), p[1] * (1.0 - 0.25 * t), 0.0]).collect())
            .collect()
    }

    fn sequence() -> SpaceTimeMap<f64> {
        let mesh =
            Arc::new(generate_box::<f64>(2, &[3, 2], &[(0.0, 1.0), (0.0, 1.0)], BoxLabels::default()).unwrap());
        let times = [0.0, 0.1, 0.3];
        let frames = scaled_frames(&mesh, &times);
        SpaceTimeMap::mesh_sequence(MeshSequence::new(mesh, times.to_vec(), frames).unwrap())
    }

    #[test]
    fn frame_times_reproduce_positions_exactly() {
        let m = sequence();
        let crate::map::MapKind::MeshSequence(seq) = m.kind() else { unreachable!() };
        for (k, &t) in seq.times().iter().enumerate() {
            assert_eq!(seq.nodal_positions(t).unwrap(), seq.frames[k]);
        }
    }

    #[test]
    fn linear_motion_matches_analytic_map() {
        let m = sequence();
        let exact = SpaceTimeMap::<f64>::axis_scaling(&["1 + 0.5*t", "1 - 0.25*t"]).unwrap();
        for &t in &[0.0, 0.05, 0.1, 0.2, 0.3] {
            for x in [[0.1, 0.2, 0.0], [0.77, 0.9, 0.0], [0.5, 0.5, 0.0]] {
                let a = m.evaluate(&x, t).unwrap();
                let b = exact.evaluate(&x, t).unwrap();
                for i in 0..2 {
                    assert!((a.position[i] - b.position[i]).abs() < 1e-14);
                    assert!((a.xi_t[i] - b.xi_t[i]).abs() < 1e-13);
                    for j in 0..2 {
                        assert!((a.f[i][j] - b.f[i][j]).abs() < 1e-13);
                    }
                }
                assert!((a.j - b.j).abs() < 1e-13);
            }
        }
        assert!(matches!(m.evaluate(&[0.5, 0.5, 0.0], 0.5), Err(MapError::TimeOutOfRange { .. })));
        assert!(matches!(m.evaluate(&[1.5, 0.5, 0.0], 0.1), Err(MapError::OutsideMesh(_))));
    }

    #[test]
    fn wall_velocity_is_backward_difference() {
        let mesh =
            Arc::new(generate_box::<f64>(2, &[1, 1], &[(0.0, 1.0), (0.0, 1.0)], BoxLabels::default()).unwrap());
        // Quadratic motion sampled at three frames.
        let times = vec![0.0, 0.1, 0.2];
        let frames = times
            .iter()
            .map(|t| mesh.vertices().iter().map(|p| [p[0] * (1.0 + t * t), p[1], 0.0]).collect())
            .collect();
        let m = SpaceTimeMap::mesh_sequence(MeshSequence::new(mesh, times, frames).unwrap());
        let v = m.wall_velocity(0, &[1.0, 0.0, 0.0], 0.2, 0.1).unwrap();
        assert!((v[0] - (1.04 - 1.01) / 0.1).abs() < 1e-13);
    }

    #[test]
    fn directory_round_trip() {
        let mesh =
            Arc::new(generate_box::<f64>(2, &[2, 2], &[(0.0, 1.0), (0.0, 1.0)], BoxLabels::default()).unwrap());
        let times = [0.0, 0.5, 1.0];
        let frames = scaled_frames(&mesh, &times);
        let dir = tempfile::tempdir().unwrap();
        for (k, (t, f)) in times.iter().zip(&frames).enumerate() {
            write_frame(&dir.path().join(format!("frame_{k:04}.txt")), *t, f).unwrap();
        }
        let seq = read_frame_directory(dir.path(), mesh.clone()).unwrap();
        assert_eq!(seq.times(), &times);
        assert_eq!(seq.nodal_positions(1.0).unwrap(), frames[2]);

        std::fs::write(dir.path().join("frame_0003.txt"), "2.0\n0 0 0\n").unwrap();
        assert!(matches!(read_frame_directory(dir.path(), mesh), Err(MapError::Frames(_))));
    }
}
