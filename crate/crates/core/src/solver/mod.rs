//! Time stepping: one linear saddle-point solve per step.

mod bc;
pub mod linear;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::sparse::norm2;
use crate::fem::{Assembler, CsrMatrix, FemError, StepData, StressForm, TaylorHoodSpace, Viscosity};
use crate::map::{MapError, SpaceTimeMap};
use crate::mesh::BoundaryLabel;
use crate::scalar::{Real, Vec3};

pub use crate::fem::assembly::smagorinsky_viscosity;
pub use bc::{
    apply_boundary_conditions, boundary_values, system_pattern, BoundaryConditionSet, BoundaryValues,
    ConstrainedSystem, DirichletFn, NeumannFn,
};
use linear::{gmres, solve_direct, DirectSolver, LinearOutcome};

/// Body force `f(position, t)` in physical coordinates.
pub type ForcingFn<T> = Arc<dyn Fn(&Vec3<T>, T) -> Vec3<T> + Send + Sync>;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("no boundary data for patch '{0}'")]
    MissingBoundaryCondition(BoundaryLabel),
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("linear solve did not reach tolerance (relative residuals {history:?})")]
    LinearSolve { history: Vec<f64> },
    #[error("invalid solver setting: {0}")]
    Config(String),
    #[error("observer aborted at step {step}: {message}")]
    Observer { step: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearSolverKind {
    #[default]
    Direct,
    Gmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeScheme {
    #[default]
    BackwardEuler,
    /// Second-order backward differences, started with one Euler step.
    Bdf2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub linear_solver: LinearSolverKind,
    /// Relative residual target; 1e-10 (direct) or 1e-8 (GMRES) if unset.
    pub tolerance: Option<f64>,
    pub scheme: TimeScheme,
    /// Smagorinsky constant; `None` disables the eddy viscosity.
    pub smagorinsky: Option<f64>,
    pub stress: StressForm,
    pub temam: bool,
    pub quadrature_degree: Option<usize>,
    pub gmres_restart: usize,
    pub max_iterations: usize,
    /// Serial assembly and factorization.
    pub deterministic: bool,
    /// Correct boundary data to zero net flux when there is no open boundary.
    pub flux_correction: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            linear_solver: LinearSolverKind::Direct,
            tolerance: None,
            scheme: TimeScheme::BackwardEuler,
            smagorinsky: None,
            stress: StressForm::Symmetric,
            temam: true,
            quadrature_degree: None,
            gmres_restart: 50,
            max_iterations: 2000,
            deterministic: false,
            flux_correction: true,
        }
    }
}

impl SolverConfig {
    pub fn tolerance<T: Real>(&self) -> T {
        let base = self.tolerance.unwrap_or(match self.linear_solver {
            LinearSolverKind::Direct => 1e-10,
            LinearSolverKind::Gmres => 1e-8,
        });
        // Unreachable targets in single precision are relaxed to roundoff.
        T::of(base).max(T::epsilon() * T::of(200.0))
    }
}

/// Everything that defines the continuous problem.
#[derive(Clone)]
pub struct Problem<T> {
    pub space: Arc<TaylorHoodSpace<T>>,
    pub map: SpaceTimeMap<T>,
    pub nu: T,
    pub forcing: Option<ForcingFn<T>>,
    pub bcs: BoundaryConditionSet<T>,
}

/// Velocity and pressure dofs on the reference mesh at `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState<T> {
    pub step: usize,
    pub time: T,
    pub u: Vec<T>,
    pub p: Vec<T>,
}

impl<T: Real> FlowState<T> {
    pub fn zero(space: &TaylorHoodSpace<T>, time: T) -> Self {
        FlowState {
            step: 0,
            time,
            u: vec![T::zero(); space.num_velocity_dofs()],
            p: vec![T::zero(); space.num_pressure_dofs()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport<T> {
    pub step: usize,
    pub time: T,
    pub linear_iterations: usize,
    pub linear_residual: T,
    /// `|B u|` of the discrete divergence constraint.
    pub divergence_residual: T,
    pub c_perp: T,
    /// Pressure gauge multiplier; roundoff-sized for compatible data.
    pub gauge_multiplier: T,
}

/// Stateful stepper caching the assembler and factorization patterns.
pub struct Solver<T: Real> {
    problem: Problem<T>,
    config: SolverConfig,
    assembler: Assembler<T>,
    direct: DirectSolver<T>,
    block_a: DirectSolver<T>,
    block_s: DirectSolver<T>,
}

impl<T: Real> Solver<T> {
    pub fn new(problem: Problem<T>, config: SolverConfig) -> Result<Self, SolverError> {
        if problem.map.dim() != problem.space.dim() {
            return Err(FemError::DimensionMismatch { space: problem.space.dim(), map: problem.map.dim() }.into());
        }
        if !(problem.nu > T::zero()) {
            return Err(SolverError::Config("viscosity must be positive".into()));
        }
        if let Some(cs) = config.smagorinsky {
            if !(cs >= 0.0) {
                return Err(SolverError::Config("Smagorinsky constant must be non-negative".into()));
            }
        }
        if config.gmres_restart == 0 || config.max_iterations == 0 {
            return Err(SolverError::Config("GMRES restart and iteration limits must be positive".into()));
        }
        problem.bcs.check(&problem.space.mesh().boundary_labels())?;
        let mut assembler = Assembler::new(problem.space.clone(), config.quadrature_degree)?;
        if config.deterministic {
            assembler.parallel = false;
            faer::set_global_parallelism(faer::Par::Seq);
        }
        Ok(Solver {
            problem,
            config,
            assembler,
            direct: DirectSolver::default(),
            block_a: DirectSolver::default(),
            block_s: DirectSolver::default(),
        })
    }

    pub fn problem(&self) -> &Problem<T> {
        &self.problem
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn assembler(&self) -> &Assembler<T> {
        &self.assembler
    }

    pub fn space(&self) -> &TaylorHoodSpace<T> {
        &self.problem.space
    }

    fn gauged(&self) -> bool {
        !self.problem.space.mesh().has_neumann()
    }

    /// Interpolated wall velocity at `t`.
    pub fn wall_velocity(&self, t: T, dt: T) -> Result<Vec<T>, SolverError> {
        let sp = &*self.problem.space;
        let d = sp.dim();
        let mut w = vec![T::zero(); sp.num_velocity_dofs()];
        if self.problem.map.is_identity() {
            return Ok(w);
        }
        for n in 0..sp.num_nodes() {
            let v = self.problem.map.wall_velocity(sp.node_cell(n), &sp.node_coords(n), t, dt)?;
            w[n * d..n * d + d].copy_from_slice(&v[..d]);
        }
        Ok(w)
    }

    /// Advances `prev` by `dt`. `prev2` (the state before `prev`) selects the
    /// BDF2 step when the configured scheme asks for it.
    pub fn advance(
        &mut self,
        prev: &FlowState<T>,
        prev2: Option<&FlowState<T>>,
        dt: T,
    ) -> Result<(FlowState<T>, StepReport<T>), SolverError> {
        if !(dt > T::zero()) {
            return Err(SolverError::Config("time step must be positive".into()));
        }
        let sp = self.problem.space.clone();
        let (nu_dofs, np) = (sp.num_velocity_dofs(), sp.num_pressure_dofs());
        if prev.u.len() != nu_dofs || prev.p.len() != np {
            return Err(FemError::FieldLength { expected: nu_dofs, found: prev.u.len() }.into());
        }
        let t_k = prev.time + dt;
        let prev2 = match self.config.scheme {
            TimeScheme::Bdf2 => prev2,
            TimeScheme::BackwardEuler => None,
        };
        let wall = self.wall_velocity(t_k, dt)?;
        let advection: Vec<T> = match prev2 {
            Some(s2) => (0..nu_dofs).map(|i| T::two() * prev.u[i] - s2.u[i] - wall[i]).collect(),
            None => prev.u.iter().zip(&wall).map(|(u, w)| *u - *w).collect(),
        };
        let viscosity = match self.config.smagorinsky {
            Some(cs) => Viscosity::Smagorinsky { nu: self.problem.nu, cs: T::of(cs) },
            None => Viscosity::Constant(self.problem.nu),
        };
        let bcs = &self.problem.bcs;
        let traction = |patch: u32, x: &Vec3<T>, t: T, n: &Vec3<T>| match bcs.neumann_data(patch) {
            Some(g) => g(x, t, n),
            None => [T::zero(); 3],
        };
        let forcing = self.problem.forcing.clone();
        let forcing_ref = forcing.as_deref().map(|f| f as &(dyn Fn(&Vec3<T>, T) -> Vec3<T> + Sync));
        let data = StepData {
            t_k,
            dt,
            advection: &advection,
            u_prev: &prev.u,
            u_prev2: prev2.map(|s| s.u.as_slice()),
            viscosity,
            forcing: forcing_ref,
            traction: Some(&traction),
            stress: self.config.stress,
            temam: self.config.temam,
        };
        let map = &self.problem.map;
        let step = self.assembler.assemble(map, &data)?;

        let gauged = self.gauged();
        let weights = (gauged && self.config.flux_correction).then(|| step.b.mul_t_vec(&vec![T::one(); np]));
        let values = boundary_values(&sp, map, bcs, t_k, &wall, weights.as_deref())?;
        let (gauge, pressure_ops) = if gauged || self.config.linear_solver == LinearSolverKind::Gmres {
            let (mp, lp) = self.assembler.pressure_operators(map, t_k)?;
            (gauged.then(|| mp.mul_vec(&vec![T::one(); np])), Some((mp, lp)))
        } else {
            (None, None)
        };
        let system = apply_boundary_conditions(&step, &values, gauge.as_deref());
        let tol = self.config.tolerance::<T>();
        let out = match self.config.linear_solver {
            LinearSolverKind::Direct => solve_direct(&mut self.direct, &system.matrix, &system.rhs, tol)?,
            LinearSolverKind::Gmres => {
                let coef = if prev2.is_some() { T::of(1.5) / dt } else { T::one() / dt };
                let (mp, lp) = pressure_ops.expect("pressure operators assembled");
                self.solve_iterative(&system, &mp, &lp, coef, tol)?
            }
        };
        let mut u = out.x[..nu_dofs].to_vec();
        for &(i, v) in &values.dofs {
            u[i] = v;
        }
        let p = out.x[nu_dofs..nu_dofs + np].to_vec();
        let gauge_multiplier = if gauged { out.x[nu_dofs + np] } else { T::zero() };
        let bu = step.b.mul_vec(&u);
        let report = StepReport {
            step: prev.step + 1,
            time: t_k,
            linear_iterations: out.iterations,
            linear_residual: out.residual,
            divergence_residual: norm2(&bu),
            c_perp: values.c_perp,
            gauge_multiplier,
        };
        log::debug!(
            "step {} t={:.6} residual={:.3e} |Bu|={:.3e} c_perp={:.3e}",
            report.step,
            t_k.to_f64_lossy(),
            out.residual.to_f64_lossy(),
            report.divergence_residual.to_f64_lossy(),
            values.c_perp.to_f64_lossy()
        );
        Ok((FlowState { step: prev.step + 1, time: t_k, u, p }, report))
    }

    /// GMRES with the block upper-triangular preconditioner
    /// `[A -B^T; 0 -S]`, where `S^{-1} = nu M_p^{-1} + coef L_p^{-1}`
    /// approximates the inverse Schur complement.
    fn solve_iterative(
        &mut self,
        system: &ConstrainedSystem<T>,
        mp: &CsrMatrix<T>,
        lp: &CsrMatrix<T>,
        coef: T,
        tol: T,
    ) -> Result<LinearOutcome<T>, SolverError> {
        let (nu, np) = (system.nu, system.np);
        let m = &system.matrix;
        let a_rows: Vec<Vec<(usize, T)>> = (0..nu)
            .map(|i| {
                let (c, v) = m.row(i);
                c.iter().zip(v).filter(|(&j, _)| j < nu).map(|(&j, &a)| (j, a)).collect()
            })
            .collect();
        let mut a_block = CsrMatrix::from_pattern(nu, a_rows.iter().map(|r| r.iter().map(|e| e.0).collect()).collect());
        for (i, r) in a_rows.iter().enumerate() {
            for &(j, a) in r {
                a_block.add(i, j, a);
            }
        }
        self.block_a.factor(&a_block)?;
        let diag_m: Vec<T> = (0..np).map(|q| mp.get(q, q)).collect();
        let mut shifted = lp.clone();
        let trace_l: T = (0..np).map(|q| lp.get(q, q)).sum();
        let trace_m: T = diag_m.iter().copied().sum();
        shifted.axpy(T::of(1e-8) * trace_l / trace_m, mp);
        self.block_s.factor(&shifted)?;
        let nu_visc = self.problem.nu;
        let (ba, bs) = (&self.block_a, &self.block_s);
        let precond = |r: &[T]| -> Vec<T> {
            let mut z = vec![T::zero(); r.len()];
            let mut lz = r[nu..nu + np].to_vec();
            bs.solve_in_place(&mut lz);
            for q in 0..np {
                z[nu + q] = -(nu_visc * r[nu + q] / diag_m[q] + coef * lz[q]);
            }
            if system.gauged {
                z[nu + np] = r[nu + np];
            }
            let mut zp = vec![T::zero(); r.len()];
            zp[nu..nu + np].copy_from_slice(&z[nu..nu + np]);
            let coupling = m.mul_vec(&zp);
            let mut zu: Vec<T> = (0..nu).map(|i| r[i] - coupling[i]).collect();
            ba.solve_in_place(&mut zu);
            z[..nu].copy_from_slice(&zu);
            z
        };
        gmres(|x| m.mul_vec(x), precond, &system.rhs, tol, self.config.gmres_restart, self.config.max_iterations)
    }
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct RunSummary<T> {
    pub final_state: FlowState<T>,
    pub reports: Vec<StepReport<T>>,
}

/// Callback invoked after every step with the previous and the new state.
pub type Observer<'a, T> = &'a mut dyn FnMut(&FlowState<T>, &FlowState<T>, &StepReport<T>) -> Result<(), String>;

/// Takes `steps` steps of size `dt` from `initial`.
pub fn run<T: Real>(
    solver: &mut Solver<T>,
    initial: FlowState<T>,
    dt: T,
    steps: usize,
    observers: &mut [Observer<'_, T>],
) -> Result<RunSummary<T>, SolverError> {
    let mut prev2: Option<FlowState<T>> = None;
    let mut state = initial;
    let mut reports = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (next, report) = solver.advance(&state, prev2.as_ref(), dt)?;
        for obs in observers.iter_mut() {
            obs(&state, &next, &report).map_err(|message| SolverError::Observer { step: report.step, message })?;
        }
        reports.push(report);
        prev2 = Some(std::mem::replace(&mut state, next));
    }
    Ok(RunSummary { final_state: state, reports })
}

#[cfg(test)]
mod tests;
