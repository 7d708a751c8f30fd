//! Space-time maps `xi(x, t)` from the reference domain onto the moving
//! physical domain, with `F = grad xi`, `J = det F` and `xi_t`.

mod sequence;

use std::sync::Arc;

use thiserror::Error;

use crate::expr::{parse, parse_list, Expr, ExprError, Jet};
use crate::linalg::{frobenius, identity, inverse, sub, Mat3};
use crate::mesh::SimplicialMesh;
use crate::scalar::{Real, Vec3};

pub use sequence::{read_frame_directory, write_frame, MeshSequence};

#[derive(Debug, Error)]
pub enum MapError {
    #[error("singular mapping at x = {point:?}, t = {time}: J = {jacobian}")]
    Singular { point: [f64; 3], time: f64, jacobian: f64 },
    #[error("map expression: {0}")]
    Expression(#[from] ExprError),
    #[error("map is {map}-dimensional but was used with dimension {found}")]
    Dimension { map: usize, found: usize },
    #[error("point {0:?} lies outside the reference mesh")]
    OutsideMesh([f64; 3]),
    #[error("time {time} outside the stored frame range [{first}, {last}]")]
    TimeOutOfRange { time: f64, first: f64, last: f64 },
    #[error("frame data: {0}")]
    Frames(String),
}

/// Map evaluation at one reference point and time.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingSample<T> {
    pub point: Vec3<T>,
    pub time: T,
    /// Physical position `xi(x, t)`.
    pub position: Vec3<T>,
    /// `F = grad xi`; in 2D the third row and column are those of the identity.
    pub f: Mat3<T>,
    pub f_inv: Mat3<T>,
    pub j: T,
    pub xi_t: Vec3<T>,
}

#[derive(Debug, Clone)]
pub enum MapKind<T> {
    Identity,
    /// `xi_i = s_i(t) x_i`, with `s_i` expressions in `t`.
    AxisScaling { scales: Vec<Expr>, sources: Vec<String> },
    /// `xi = (x1 s, x2, x3 s)` with `s = sqrt(1 - t/4)`: the shrinking tube.
    TubeShrink,
    /// Components given as expressions in `x1 .. xd, t`.
    Expression { components: Vec<Expr>, source: String },
    MeshSequence(Arc<MeshSequence<T>>),
}

#[derive(Debug, Clone)]
pub struct SpaceTimeMap<T> {
    dim: usize,
    kind: MapKind<T>,
}

fn to_f64_point<T: Real>(x: &Vec3<T>) -> [f64; 3] {
    [x[0].to_f64_lossy(), x[1].to_f64_lossy(), x[2].to_f64_lossy()]
}

fn var_names(dim: usize) -> &'static [&'static str] {
    if dim == 2 {
        &["x1", "x2", "t"]
    } else {
        &["x1", "x2", "x3", "t"]
    }
}

/// Parses `d` semicolon-separated component expressions in `x1 .. xd, t`.
pub fn parse_map_expressions<T: Real>(source: &str, dim: usize) -> Result<SpaceTimeMap<T>, MapError> {
    if dim != 2 && dim != 3 {
        return Err(MapError::Dimension { map: dim, found: dim });
    }
    let components = parse_list(source, var_names(dim), dim)?;
    Ok(SpaceTimeMap { dim, kind: MapKind::Expression { components, source: source.to_string() } })
}

impl<T: Real> SpaceTimeMap<T> {
    pub fn identity(dim: usize) -> Self {
        SpaceTimeMap { dim, kind: MapKind::Identity }
    }

    pub fn tube_shrink(dim: usize) -> Self {
        SpaceTimeMap { dim, kind: MapKind::TubeShrink }
    }

    /// Axis scaling with one expression in `t` per axis.
    pub fn axis_scaling(scales: &[&str]) -> Result<Self, MapError> {
        let dim = scales.len();
        if dim != 2 && dim != 3 {
            return Err(MapError::Dimension { map: dim, found: dim });
        }
        let parsed = scales.iter().map(|s| parse(s, &["t"])).collect::<Result<Vec<_>, _>>()?;
        Ok(SpaceTimeMap {
            dim,
            kind: MapKind::AxisScaling { scales: parsed, sources: scales.iter().map(|s| s.to_string()).collect() },
        })
    }

    pub fn mesh_sequence(sequence: MeshSequence<T>) -> Self {
        SpaceTimeMap { dim: sequence.mesh().dim(), kind: MapKind::MeshSequence(Arc::new(sequence)) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &MapKind<T> {
        &self.kind
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, MapKind::Identity)
    }

    /// Whether the map is only defined cell by cell (piecewise-linear data).
    pub fn is_cellwise(&self) -> bool {
        matches!(self.kind, MapKind::MeshSequence(_))
    }

    fn finish(&self, point: Vec3<T>, time: T, position: Vec3<T>, f: Mat3<T>, xi_t: Vec3<T>) -> Result<MappingSample<T>, MapError> {
        let singular = || MapError::Singular {
            point: to_f64_point(&point),
            time: time.to_f64_lossy(),
            jacobian: crate::linalg::det(&f).to_f64_lossy(),
        };
        let (f_inv, j) = inverse(&f).ok_or_else(singular)?;
        if !(j > T::zero()) || !j.is_finite() {
            return Err(singular());
        }
        Ok(MappingSample { point, time, position, f, f_inv, j, xi_t })
    }

    /// Evaluates the map at reference point `x` and time `t`. Cell-wise maps
    /// locate the containing cell first; prefer [`Self::evaluate_in_cell`].
    pub fn evaluate(&self, x: &Vec3<T>, t: T) -> Result<MappingSample<T>, MapError> {
        if let MapKind::MeshSequence(seq) = &self.kind {
            let cell = seq.mesh().locate(x).ok_or(MapError::OutsideMesh(to_f64_point(x)))?;
            return self.evaluate_in_cell(cell, x, t);
        }
        let d = self.dim;
        let mut x = *x;
        if d == 2 {
            x[2] = T::zero();
        }
        match &self.kind {
            MapKind::Identity => self.finish(x, t, x, identity(), [T::zero(); 3]),
            MapKind::TubeShrink => {
                let s = (T::one() - t / T::of(4.0)).sqrt();
                let ds = -T::one() / (T::of(8.0) * s);
                let mut f = identity();
                let mut pos = x;
                let mut xt = [T::zero(); 3];
                for i in [0usize, 2] {
                    if i < d {
                        f[i][i] = s;
                        pos[i] = x[i] * s;
                        xt[i] = x[i] * ds;
                    }
                }
                self.finish(x, t, pos, f, xt)
            }
            MapKind::AxisScaling { scales, .. } => {
                let tj = [Jet::var(t, 0)];
                let mut f = identity();
                let mut pos = x;
                let mut xt = [T::zero(); 3];
                for (i, s) in scales.iter().enumerate() {
                    let sj = s.eval_jet(&tj);
                    f[i][i] = sj.v;
                    pos[i] = sj.v * x[i];
                    xt[i] = sj.d[0] * x[i];
                }
                self.finish(x, t, pos, f, xt)
            }
            MapKind::Expression { components, .. } => {
                let mut vars: Vec<Jet<T>> = (0..d).map(|i| Jet::var(x[i], i)).collect();
                vars.push(Jet::var(t, d));
                let mut f = identity();
                let mut pos = x;
                let mut xt = [T::zero(); 3];
                for (i, c) in components.iter().enumerate() {
                    let v = c.eval_jet(&vars);
                    pos[i] = v.v;
                    for j in 0..d {
                        f[i][j] = v.d[j];
                    }
                    xt[i] = v.d[d];
                }
                self.finish(x, t, pos, f, xt)
            }
            MapKind::MeshSequence(_) => unreachable!(),
        }
    }

    /// Evaluates the map at `x` known to lie in `cell` of the reference
    /// mesh. Analytic maps ignore the cell.
    pub fn evaluate_in_cell(&self, cell: usize, x: &Vec3<T>, t: T) -> Result<MappingSample<T>, MapError> {
        match &self.kind {
            MapKind::MeshSequence(seq) => {
                let (pos, f, xt) = seq.evaluate_in_cell(cell, x, t)?;
                self.finish(*x, t, pos, f, xt)
            }
            _ => self.evaluate(x, t),
        }
    }

    /// Wall velocity used for boundary data and the advection field at
    /// `t_k`: the exact `xi_t` for analytic maps, the backward difference
    /// `(xi(t) - xi(t - dt)) / dt` for frame sequences.
    pub fn wall_velocity(&self, cell: usize, x: &Vec3<T>, t: T, dt: T) -> Result<Vec3<T>, MapError> {
        match &self.kind {
            MapKind::MeshSequence(seq) => {
                let (p1, _, _) = seq.evaluate_in_cell(cell, x, t)?;
                let (p0, _, _) = seq.evaluate_in_cell(cell, x, t - dt)?;
                Ok([(p1[0] - p0[0]) / dt, (p1[1] - p0[1]) / dt, (p1[2] - p0[2]) / dt])
            }
            _ => Ok(self.evaluate(x, t)?.xi_t),
        }
    }
}

/// Central-difference estimate of `|div(J F^{-1})|`, the divergence taken
/// column by column. Vanishes for smooth maps up to `O(delta^2)`.
pub fn piola_residual<T: Real>(map: &SpaceTimeMap<T>, x: &Vec3<T>, t: T, delta: T) -> Result<T, MapError> {
    let d = map.dim();
    let mut res = [T::zero(); 3];
    for i in 0..d {
        let mut xp = *x;
        let mut xm = *x;
        xp[i] += delta;
        xm[i] -= delta;
        let (sp, sm) = (map.evaluate(&xp, t)?, map.evaluate(&xm, t)?);
        for (j, r) in res.iter_mut().enumerate().take(d) {
            *r += (sp.j * sp.f_inv[i][j] - sm.j * sm.f_inv[i][j]) / (T::two() * delta);
        }
    }
    Ok(res.iter().map(|r| *r * *r).sum::<T>().sqrt())
}

/// Acceptance thresholds `(c_J, C_F, eps)` for [`validate_assumptions`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapThresholds<T> {
    pub c_j: T,
    pub c_f: T,
    pub eps: T,
}

impl<T: Real> Default for MapThresholds<T> {
    fn default() -> Self {
        MapThresholds { c_j: T::of(0.1), c_f: T::of(100.0), eps: T::of(0.9) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapValidationReport<T> {
    pub min_j: T,
    pub max_f_norm: T,
    pub max_finv_norm: T,
    pub max_i_minus_f: T,
    pub sample_count: usize,
    pub thresholds: MapThresholds<T>,
    pub passed: bool,
}

impl<T: Real> std::fmt::Display for MapValidationReport<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "samples        {}", self.sample_count)?;
        writeln!(f, "min J          {:.6}", self.min_j)?;
        writeln!(f, "max |F|        {:.6}", self.max_f_norm)?;
        writeln!(f, "max |F^-1|     {:.6}", self.max_finv_norm)?;
        writeln!(f, "max |I - F|    {:.6}", self.max_i_minus_f)?;
        writeln!(
            f,
            "thresholds     c_J = {}, C_F = {}, eps = {}",
            self.thresholds.c_j, self.thresholds.c_f, self.thresholds.eps
        )?;
        write!(f, "passed         {}", self.passed)
    }
}

/// Samples the map at every vertex and cell barycenter of `mesh` for each
/// of `times` and checks the bounds on `J`, `|F|`, `|F^{-1}|` and `|I - F|`.
pub fn validate_assumptions<T: Real>(
    map: &SpaceTimeMap<T>,
    mesh: &SimplicialMesh<T>,
    times: &[T],
    thresholds: MapThresholds<T>,
) -> Result<MapValidationReport<T>, MapError> {
    if map.dim() != mesh.dim() {
        return Err(MapError::Dimension { map: map.dim(), found: mesh.dim() });
    }
    let d = mesh.dim();
    let mut report = MapValidationReport {
        min_j: T::infinity(),
        max_f_norm: T::zero(),
        max_finv_norm: T::zero(),
        max_i_minus_f: T::zero(),
        sample_count: 0,
        thresholds,
        passed: false,
    };
    let mut visit = |s: MappingSample<T>| {
        report.min_j = report.min_j.min(s.j);
        report.max_f_norm = report.max_f_norm.max(frobenius(&s.f, d));
        report.max_finv_norm = report.max_finv_norm.max(frobenius(&s.f_inv, d));
        report.max_i_minus_f = report.max_i_minus_f.max(frobenius(&sub(&identity(), &s.f), d));
        report.sample_count += 1;
    };
    let nloc = T::of_usize(d + 1);
    for &t in times {
        if map.is_cellwise() {
            for c in 0..mesh.num_cells() {
                let pts = mesh.cell_points(c);
                for p in &pts {
                    visit(map.evaluate_in_cell(c, p, t)?);
                }
                let mut b = [T::zero(); 3];
                for p in &pts {
                    for k in 0..3 {
                        b[k] += p[k] / nloc;
                    }
                }
                visit(map.evaluate_in_cell(c, &b, t)?);
            }
        } else {
            for p in mesh.vertices() {
                visit(map.evaluate(p, t)?);
            }
            for c in 0..mesh.num_cells() {
                let mut b = [T::zero(); 3];
                for p in mesh.cell_points(c) {
                    for k in 0..3 {
                        b[k] += p[k] / nloc;
                    }
                }
                visit(map.evaluate(&b, t)?);
            }
        }
    }
    report.passed = report.sample_count > 0
        && report.min_j >= thresholds.c_j
        && report.max_f_norm.max(report.max_finv_norm) <= thresholds.c_f
        && report.max_i_minus_f <= thresholds.eps;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{det, mul};
    use crate::mesh::{generate_box, BoxLabels};

    fn check_consistency(s: &MappingSample<f64>) {
        assert!((det(&s.f) - s.j).abs() < 1e-12 * s.j.abs().max(1.0));
        let p = mul(&s.f, &s.f_inv);
        assert!(frobenius(&sub(&p, &identity()), 3) < 1e-12);
    }

    #[test]
    fn identity_map() {
        let m = SpaceTimeMap::<f64>::identity(3);
        let s = m.evaluate(&[0.3, -2.0, 5.0], 0.7).unwrap();
        assert_eq!(s.f, identity::<f64>());
        assert_eq!(s.j, 1.0);
        assert_eq!(s.xi_t, [0.0; 3]);
        assert_eq!(s.position, [0.3, -2.0, 5.0]);
    }

    #[test]
    fn tube_shrink_at_final_time() {
        let m = SpaceTimeMap::<f64>::tube_shrink(3);
        let s = m.evaluate(&[0.5, 1.0, -0.25], 0.2).unwrap();
        assert!((s.j - 0.95).abs() < 1e-14);
        assert!((s.f[0][0] - 0.974_679_434_480_896_4).abs() < 1e-14);
        assert_eq!(s.f[1][1], 1.0);
        // xi_t = (-x1 / (8 s), 0, -x3 / (8 s))
        let sq = 0.95f64.sqrt();
        assert!((s.xi_t[0] + 0.5 / (8.0 * sq)).abs() < 1e-15);
        assert!((s.xi_t[2] - 0.25 / (8.0 * sq)).abs() < 1e-15);
        check_consistency(&s);
    }

    #[test]
    fn axis_scaling_is_area_preserving() {
        let m = SpaceTimeMap::<f64>::axis_scaling(&["1 + t", "1/(1 + t)"]).unwrap();
        for t in [0.0, 0.3, 2.5] {
            let s = m.evaluate(&[0.2, 0.9, 0.0], t).unwrap();
            assert!((s.j - 1.0).abs() < 1e-14);
            check_consistency(&s);
        }
    }

    #[test]
    fn expression_map_derivatives() {
        let m = parse_map_expressions::<f64>("x1*(1+t); x2/(1+t)", 2).unwrap();
        let s = m.evaluate(&[1.0, 1.0, 0.0], 1.0).unwrap();
        assert_eq!(s.position[..2], [2.0, 0.5]);
        assert_eq!((s.f[0][0], s.f[1][1], s.f[0][1], s.f[1][0]), (2.0, 0.5, 0.0, 0.0));
        assert_eq!(s.xi_t[..2], [1.0, -0.25]);

        let tube = parse_map_expressions::<f64>("x1*sqrt(1 - t/4); x2; x3*sqrt(1 - t/4)", 3).unwrap();
        assert_eq!(tube.evaluate(&[0.3, 0.1, 0.2], 0.0).unwrap().j, 1.0);
        let a = tube.evaluate(&[0.3, 0.1, 0.2], 0.13).unwrap();
        let b = SpaceTimeMap::tube_shrink(3).evaluate(&[0.3, 0.1, 0.2], 0.13).unwrap();
        assert!(frobenius(&sub(&a.f, &b.f), 3) < 1e-15);

        let id = parse_map_expressions::<f64>("x1; x2", 2).unwrap();
        assert_eq!(id.evaluate(&[0.4, 0.6, 0.0], 3.0).unwrap().f, identity::<f64>());
    }

    #[test]
    fn expression_errors() {
        assert!(matches!(parse_map_expressions::<f64>("x1 + y; x2", 2), Err(MapError::Expression(_))));
        assert!(matches!(parse_map_expressions::<f64>("x1; x2", 3), Err(MapError::Expression(_))));
        assert!(matches!(parse_map_expressions::<f64>("x1 +* 2; x2", 2), Err(MapError::Expression(_))));
    }

    #[test]
    fn degenerate_map_is_singular() {
        let m = parse_map_expressions::<f64>("x1*t; x2", 2).unwrap();
        assert!(matches!(m.evaluate(&[0.5, 0.5, 0.0], 0.0), Err(MapError::Singular { .. })));
        let mesh = generate_box::<f64>(2, &[2, 2], &[(0.0, 1.0), (0.0, 1.0)], BoxLabels::default()).unwrap();
        assert!(validate_assumptions(&m, &mesh, &[0.0], MapThresholds::default()).is_err());
    }

    #[test]
    fn piola_residuals() {
        let x = [0.3, -0.2, 0.45];
        assert_eq!(piola_residual(&SpaceTimeMap::<f64>::identity(3), &x, 0.1, 1e-3).unwrap(), 0.0);
        assert!(piola_residual(&SpaceTimeMap::<f64>::tube_shrink(3), &x, 0.1, 1e-3).unwrap() <= 1e-6);
        let m = parse_map_expressions::<f64>("x1*(1+t); x2/(1+t)", 2).unwrap();
        assert!(piola_residual(&m, &x, 0.4, 1e-3).unwrap() <= 1e-6);
    }

    #[test]
    fn validation_reports() {
        let mesh = generate_box::<f64>(3, &[2, 2, 2], &[(-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)], BoxLabels::default())
            .unwrap();
        let r = validate_assumptions(&SpaceTimeMap::identity(3), &mesh, &[0.0, 1.0], MapThresholds {
            c_j: 0.5,
            c_f: 10.0,
            eps: 0.5,
        })
        .unwrap();
        assert!(r.passed);
        assert_eq!(r.min_j, 1.0);
        assert_eq!(r.sample_count, 2 * (27 + 48));

        let times: Vec<f64> = (0..=10).map(|k| 0.02 * k as f64).collect();
        let r = validate_assumptions(&SpaceTimeMap::tube_shrink(3), &mesh, &times, MapThresholds::default()).unwrap();
        assert!((r.min_j - 0.95).abs() < 1e-14);
        assert!((r.max_i_minus_f - 2f64.sqrt() * (1.0 - 0.95f64.sqrt())).abs() < 1e-14);
        assert!(r.passed);
        let strict = MapThresholds { c_j: 0.96, ..MapThresholds::default() };
        assert!(!validate_assumptions(&SpaceTimeMap::tube_shrink(3), &mesh, &times, strict).unwrap().passed);
    }

    #[test]
    fn single_precision_evaluation() {
        let s = SpaceTimeMap::<f32>::tube_shrink(3).evaluate(&[1.0, 0.0, 1.0], 0.2).unwrap();
        assert!((s.j - 0.95).abs() < 1e-6);
    }
}
