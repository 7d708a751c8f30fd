//! Built-in benchmark problems with closed-form solutions.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::norms::ExactVelocity;
use super::AnalysisError;
use crate::fem::{StressForm, TaylorHoodSpace};
use crate::linalg::{mat_vec, Mat3};
use crate::map::SpaceTimeMap;
use crate::mesh::{generate_box, generate_tube, refine_uniform, BoundaryLabel, BoxLabels, SimplicialMesh, TubeLabels};
use crate::scalar::{Real, Vec3};
use crate::solver::{BoundaryConditionSet, FlowState, ForcingFn, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseKind {
    /// Shrinking axisymmetric tube with an exact solution.
    Tube,
    /// Manufactured flow in an area-preserving stretched square.
    Manufactured2d,
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseKind::Tube => "tube",
            CaseKind::Manufactured2d => "manufactured-2d",
        })
    }
}

impl std::str::FromStr for CaseKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tube" => Ok(CaseKind::Tube),
            "manufactured-2d" | "manufactured" => Ok(CaseKind::Manufactured2d),
            _ => Err(format!("unknown case '{s}' (expected tube or manufactured-2d)")),
        }
    }
}

/// Exact fields of a case, in physical coordinates.
pub trait ExactSolution<T>: ExactVelocity<T> + Send {
    fn pressure(&self, x: &Vec3<T>, t: T) -> T;
    fn forcing(&self, x: &Vec3<T>, t: T) -> Vec3<T>;
}

/// A benchmark problem: map, exact solution, forcing and boundary layout,
/// plus the mesh and time-step sequence used by convergence studies.
#[derive(Clone)]
pub struct BenchmarkCase<T> {
    pub kind: CaseKind,
    pub dim: usize,
    pub map: SpaceTimeMap<T>,
    pub nu: T,
    pub t_end: T,
    pub stress: StressForm,
    pub exact: Arc<dyn ExactSolution<T>>,
    /// Nominal mesh step of level 0.
    pub h0: T,
    /// Factor by which the mesh step shrinks per level.
    pub level_ratio: T,
    /// Time step of level 0.
    pub dt0: T,
}

impl<T: Real> fmt::Debug for BenchmarkCase<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BenchmarkCase")
            .field("kind", &self.kind)
            .field("nu", &self.nu)
            .field("t_end", &self.t_end)
            .field("stress", &self.stress)
            .finish_non_exhaustive()
    }
}

impl<T: Real> BenchmarkCase<T> {
    pub fn new(kind: CaseKind) -> Self {
        match kind {
            CaseKind::Tube => tube_benchmark(),
            CaseKind::Manufactured2d => manufactured_2d(),
        }
    }

    pub fn name(&self) -> String {
        self.kind.to_string()
    }

    /// Nominal mesh step of `level`.
    pub fn h(&self, level: usize) -> T {
        self.h0 / self.level_ratio.powi(level as i32)
    }

    /// Reference mesh of refinement `level`.
    pub fn mesh(&self, level: usize) -> Result<SimplicialMesh<T>, AnalysisError> {
        match self.kind {
            CaseKind::Tube => {
                // Cross-section and axial divisions grow by sqrt(2) per level.
                let n = (3.0 * 2f64.sqrt().powi(level as i32)).round() as usize;
                let labels = TubeLabels {
                    lateral: BoundaryLabel::NoSlip,
                    inlet: BoundaryLabel::Dirichlet(1),
                    outlet: BoundaryLabel::Neumann(0),
                };
                let radius = |y: T| (T::half() * (y / T::of(4.0) + T::one())).exp();
                Ok(generate_tube(2 * n, n, radius, (T::of(-4.0), T::of(4.0)), labels)?)
            }
            CaseKind::Manufactured2d => {
                let labels = BoxLabels::uniform(BoundaryLabel::Dirichlet(1));
                let mut m = generate_box(2, &[8, 8], &[(T::zero(), T::one()), (T::zero(), T::one())], labels)?;
                for _ in 0..level {
                    m = refine_uniform(&m);
                }
                Ok(m)
            }
        }
    }

    pub fn boundary_conditions(&self) -> BoundaryConditionSet<T> {
        let ex = self.exact.clone();
        let bcs = BoundaryConditionSet::new().dirichlet(1, Arc::new(move |x: &Vec3<T>, t| ex.velocity(x, t)));
        match self.kind {
            CaseKind::Tube => {
                // Exact traction (-p I + nu grad u) n on the outlet.
                let ex = self.exact.clone();
                let nu = self.nu;
                bcs.neumann(
                    0,
                    Some(Arc::new(move |x: &Vec3<T>, t, n: &Vec3<T>| {
                        let g = ex.gradient(x, t);
                        let p = ex.pressure(x, t);
                        let gn = mat_vec(&g, n);
                        std::array::from_fn(|k| nu * gn[k] - p * n[k])
                    })),
                )
            }
            CaseKind::Manufactured2d => bcs,
        }
    }

    pub fn forcing(&self) -> ForcingFn<T> {
        let ex = self.exact.clone();
        Arc::new(move |x: &Vec3<T>, t| ex.forcing(x, t))
    }

    pub fn problem(&self, space: Arc<TaylorHoodSpace<T>>) -> Problem<T> {
        Problem {
            space,
            map: self.map.clone(),
            nu: self.nu,
            forcing: Some(self.forcing()),
            bcs: self.boundary_conditions(),
        }
    }

    /// Nodal interpolant of the exact solution at `t`.
    pub fn interpolate(&self, space: &TaylorHoodSpace<T>, t: T) -> Result<FlowState<T>, AnalysisError> {
        let err = std::cell::RefCell::new(None);
        let u = space.interpolate_velocity(|n, x| match self.map.evaluate_in_cell(space.node_cell(n), x, t) {
            Ok(s) => self.exact.velocity(&s.position, t),
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                [T::nan(); 3]
            }
        });
        if let Some(e) = err.into_inner() {
            return Err(e.into());
        }
        let mesh = space.mesh();
        let mut p = Vec::with_capacity(space.num_pressure_dofs());
        for v in 0..mesh.num_vertices() {
            let x = mesh.vertex(v);
            let s = self.map.evaluate(&x, t)?;
            p.push(self.exact.pressure(&s.position, t));
        }
        Ok(FlowState { step: 0, time: t, u: u?, p })
    }
}

// ---------------------------------------------------------------- tube ----

struct TubeSolution<T> {
    nu: T,
}

impl<T: Real> TubeSolution<T> {
    /// `(E, a, r^2)` with `E = exp(-(y+4)/4)` and `a = 4 - t`.
    fn parts(x: &Vec3<T>, t: T) -> (T, T, T) {
        let e = (-(x[1] + T::of(4.0)) / T::of(4.0)).exp();
        (e, T::of(4.0) - t, x[0] * x[0] + x[2] * x[2])
    }
}

impl<T: Real> ExactVelocity<T> for TubeSolution<T> {
    fn velocity(&self, x: &Vec3<T>, t: T) -> Vec3<T> {
        let (e, a, r2) = Self::parts(x, t);
        let radial = -T::two() * e * r2 / (a * a);
        [radial * x[0], T::of(8.0) / a - T::of(32.0) * e * r2 / (a * a), radial * x[2]]
    }

    fn gradient(&self, x: &Vec3<T>, t: T) -> Mat3<T> {
        let (e, a, r2) = Self::parts(x, t);
        let (px, pz) = (x[0], x[2]);
        let a2 = a * a;
        let two = T::two();
        let four = T::of(4.0);
        // d/dy of (-2 E r^2 x_i / a^2) is E r^2 x_i / (2 a^2).
        let dy = e * r2 / (two * a2);
        let g_axial = -T::of(64.0) * e / a2;
        [
            [-two * e * (two * px * px + r2) / a2, dy * px, -four * e * px * pz / a2],
            [g_axial * px, T::of(8.0) * e * r2 / a2, g_axial * pz],
            [-four * e * px * pz / a2, dy * pz, -two * e * (two * pz * pz + r2) / a2],
        ]
    }
}

impl<T: Real> ExactSolution<T> for TubeSolution<T> {
    fn pressure(&self, x: &Vec3<T>, t: T) -> T {
        let (e, a, _) = Self::parts(x, t);
        let a2 = a * a;
        let c512 = T::of(512.0) * self.nu;
        // Gauge: p = 0 on the outlet plane y = 4.
        let p_tilde = (T::of(32.0) - c512 * (-T::two()).exp()) / a2;
        c512 * e / a2 - T::of(8.0) * x[1] / a2 + p_tilde
    }

    fn forcing(&self, x: &Vec3<T>, t: T) -> Vec3<T> {
        let (e, a, r2) = Self::parts(x, t);
        let a2 = a * a;
        let a4 = a2 * a2;
        let e2 = e * e;
        let nu = self.nu;
        let radial = nu * e / a2 * (T::of(16.0) + r2 / T::of(8.0)) - T::of(4.0) * e2 * r2 * r2 / a4;
        [
            radial * x[0],
            T::two() * nu * e * r2 / a2 - T::of(128.0) * e2 * r2 * r2 / a4,
            radial * x[2],
        ]
    }
}

/// Shrinking tube `r^2 <= exp(y/4 + 1) (1 - t/4)`, `-4 <= y <= 4`, with an
/// exact solution, `nu = 0.04`, `T = 0.2` and the full-gradient stress.
/// Lateral wall no-slip, exact velocity on the inlet `y = -4`, exact
/// traction on the outlet `y = 4` where `p = 0`.
pub fn tube_benchmark<T: Real>() -> BenchmarkCase<T> {
    let nu = T::of(0.04);
    BenchmarkCase {
        kind: CaseKind::Tube,
        dim: 3,
        map: SpaceTimeMap::tube_shrink(3),
        nu,
        t_end: T::of(0.2),
        stress: StressForm::FullGradient,
        exact: Arc::new(TubeSolution { nu }),
        h0: T::one(),
        level_ratio: T::of(2f64.sqrt()),
        dt0: T::of(0.04),
    }
}

// --------------------------------------------------------- manufactured ----

const ALPHA: f64 = 0.1;

struct ManufacturedSolution<T> {
    nu: T,
}

impl<T: Real> ManufacturedSolution<T> {
    fn trig(x: &Vec3<T>) -> (T, T, T, T) {
        let pi = T::of(PI);
        let (sx, cx) = (pi * x[0]).sin_cos();
        let (sy, cy) = (pi * x[1]).sin_cos();
        (sx, cx, sy, cy)
    }
}

impl<T: Real> ExactVelocity<T> for ManufacturedSolution<T> {
    fn velocity(&self, x: &Vec3<T>, t: T) -> Vec3<T> {
        let (sx, cx, sy, cy) = Self::trig(x);
        let k = T::of(PI) * t.cos();
        [k * sx * cy, -k * cx * sy, T::zero()]
    }

    fn gradient(&self, x: &Vec3<T>, t: T) -> Mat3<T> {
        let (sx, cx, sy, cy) = Self::trig(x);
        let k = T::of(PI * PI) * t.cos();
        let z = T::zero();
        [[k * cx * cy, -k * sx * sy, z], [k * sx * sy, -k * cx * cy, z], [z, z, z]]
    }
}

impl<T: Real> ExactSolution<T> for ManufacturedSolution<T> {
    fn pressure(&self, x: &Vec3<T>, t: T) -> T {
        let (_, cx, _, cy) = Self::trig(x);
        // Physical domain [0, a] x [0, 1/a] has unit area.
        let a = T::one() + T::of(ALPHA) * t;
        let pi = T::of(PI);
        let mean = (pi * a).sin() * (pi / a).sin() / (pi * pi);
        (cx * cy - mean) * t.cos()
    }

    fn forcing(&self, x: &Vec3<T>, t: T) -> Vec3<T> {
        let (sx, cx, sy, cy) = Self::trig(x);
        let pi = T::of(PI);
        let pi3 = pi * pi * pi;
        let (st, ct) = t.sin_cos();
        let nu2 = T::two() * self.nu;
        [
            -pi * sx * cy * st + pi3 * ct * ct * sx * cx + nu2 * pi3 * sx * cy * ct - pi * sx * cy * ct,
            pi * cx * sy * st + pi3 * ct * ct * sy * cy - nu2 * pi3 * cx * sy * ct - pi * cx * sy * ct,
            T::zero(),
        ]
    }
}

/// Stream-function flow `psi = sin(pi x) sin(pi y) cos t` in the square
/// stretched by `(1 + t/10, 1/(1 + t/10))`, `nu = 1`, `T = 0.5`, exact
/// Dirichlet data on the whole boundary.
pub fn manufactured_2d<T: Real>() -> BenchmarkCase<T> {
    let nu = T::one();
    let map = SpaceTimeMap::axis_scaling(&["1 + 0.1*t", "1/(1 + 0.1*t)"]).expect("valid built-in map");
    BenchmarkCase {
        kind: CaseKind::Manufactured2d,
        dim: 2,
        map,
        nu,
        t_end: T::half(),
        stress: StressForm::Symmetric,
        exact: Arc::new(ManufacturedSolution { nu }),
        h0: T::one() / T::of(8.0),
        level_ratio: T::two(),
        dt0: T::of(0.05),
    }
}

/// Pointwise residual `u_t + (u . grad) u - nu lap u + grad p - f` of the
/// exact fields, by fourth-order central differences of velocity and
/// pressure only (the analytic gradient is not used).
pub fn momentum_residual(exact: &dyn ExactSolution<f64>, dim: usize, nu: f64, x: &Vec3<f64>, t: f64) -> f64 {
    let h = 1e-3;
    let d1 = |f: &dyn Fn(f64) -> f64| (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h);
    let d2 = |f: &dyn Fn(f64) -> f64| {
        (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h)
    };
    let shifted = |j: usize, s: f64| {
        let mut y = *x;
        y[j] += s;
        y
    };
    let u = exact.velocity(x, t);
    let f = exact.forcing(x, t);
    let mut worst: f64 = 0.0;
    for i in 0..dim {
        let mut r = d1(&|s| exact.velocity(x, t + s)[i]) - f[i];
        for j in 0..dim {
            r += u[j] * d1(&|s| exact.velocity(&shifted(j, s), t)[i]);
            r -= nu * d2(&|s| exact.velocity(&shifted(j, s), t)[i]);
        }
        r += d1(&|s| exact.pressure(&shifted(i, s), t));
        worst = worst.max(r.abs());
    }
    worst
}
