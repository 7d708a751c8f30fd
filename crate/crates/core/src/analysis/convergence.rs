//! Convergence studies over a refinement sequence.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::benchmark::BenchmarkCase;
use super::norms::{energy_error, EnergyErrorReport};
use super::AnalysisError;
use crate::fem::sparse::norm2;
use crate::fem::TaylorHoodSpace;
use crate::scalar::Real;
use crate::solver::{FlowState, Solver, SolverConfig};

/// How the time step follows the mesh step between levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Pairing {
    /// `dt ~ h^2`
    #[default]
    #[serde(rename = "dt-h2")]
    DtH2,
    /// `dt ~ h`
    #[serde(rename = "dt-h")]
    DtH,
}

impl std::str::FromStr for Pairing {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dt-h2" => Ok(Pairing::DtH2),
            "dt-h" => Ok(Pairing::DtH),
            _ => Err(format!("unknown pairing '{s}' (expected dt-h2 or dt-h)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub cells: usize,
    pub dt: f64,
    pub steps: usize,
    pub error: f64,
    /// `error[i-1] / error[i]`
    pub ratio: Option<f64>,
    /// `log(ratio) / log(h[i-1] / h[i])`
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Builds the table from `(h, cells, dt, steps, error)`; rejects
    /// non-finite or non-positive errors.
    pub fn from_levels(levels: &[(f64, usize, f64, usize, f64)]) -> Result<Self, AnalysisError> {
        let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels.len());
        for (i, &(h, cells, dt, steps, error)) in levels.iter().enumerate() {
            if !(error.is_finite() && error > 0.0) {
                return Err(AnalysisError::InvalidError { level: i, value: error });
            }
            let (ratio, order) = match rows.last() {
                Some(prev) => {
                    let r = prev.error / error;
                    (Some(r), Some(r.ln() / (prev.h / h).ln()))
                }
                None => (None, None),
            };
            rows.push(ConvergenceRow { h, cells, dt, steps, error, ratio, order });
        }
        Ok(ConvergenceTable { rows })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("mesh_step_size,elements,time_step,steps,error,ratio,observed_order\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
        for r in &self.rows {
            s.push_str(&format!(
                "{:.6},{},{:.6},{},{:.6e},{},{}\n",
                r.h,
                r.cells,
                r.dt,
                r.steps,
                r.error,
                opt(r.ratio),
                opt(r.order)
            ));
        }
        s
    }

    /// Observed order between the last two rows.
    pub fn final_order(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.order)
    }
}

impl fmt::Display for ConvergenceTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>10} {:>9} {:>10} {:>6} {:>12} {:>7} {:>7}", "h", "elements", "dt", "N", "error", "ratio", "order")?;
        for r in &self.rows {
            let opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
            writeln!(
                f,
                "{:>10.5} {:>9} {:>10.5} {:>6} {:>12.4e} {:>7} {:>7}",
                r.h,
                r.cells,
                r.dt,
                r.steps,
                r.error,
                opt(r.ratio),
                opt(r.order)
            )?;
        }
        Ok(())
    }
}

/// Outcome of one level of a study.
#[derive(Debug, Clone)]
pub struct LevelResult<T> {
    pub level: usize,
    pub h: T,
    pub dt: T,
    pub steps: usize,
    pub cells: usize,
    pub report: EnergyErrorReport<T>,
    /// Largest `|B u| / (tol |u|)` over the steps.
    pub max_divergence_ratio: T,
    pub final_state: FlowState<T>,
}

/// Time step and step count of `level`; the step count is rounded so that
/// `N dt = T` exactly.
pub fn level_time_step<T: Real>(case: &BenchmarkCase<T>, level: usize, pairing: Pairing) -> (T, usize) {
    let p = match pairing {
        Pairing::DtH2 => 2,
        Pairing::DtH => 1,
    };
    let dt = case.dt0 / case.level_ratio.powi((p * level) as i32);
    let n = (case.t_end / dt).round().to_usize().unwrap_or(0).max(1);
    (case.t_end / T::of_usize(n), n)
}

/// Runs `case` on one refinement level and evaluates its energy error.
pub fn run_level<T: Real>(
    case: &BenchmarkCase<T>,
    level: usize,
    pairing: Pairing,
    config: &SolverConfig,
) -> Result<LevelResult<T>, AnalysisError> {
    let annotate = |e: AnalysisError| AnalysisError::Level { level, source: Box::new(e) };
    let mesh = case.mesh(level).map_err(annotate)?;
    let cells = mesh.num_cells();
    let space = Arc::new(TaylorHoodSpace::new(Arc::new(mesh), 1).map_err(|e| annotate(e.into()))?);
    let config = SolverConfig { stress: case.stress, ..config.clone() };
    let tol = config.tolerance::<T>();
    let mut solver = Solver::new(case.problem(space.clone()), config).map_err(|e| annotate(e.into()))?;
    let (dt, steps) = level_time_step(case, level, pairing);
    let mut prev2: Option<FlowState<T>> = None;
    let mut state = case.interpolate(&space, T::zero()).map_err(annotate)?;
    let mut trajectory = Vec::with_capacity(steps);
    let mut max_div = T::zero();
    for _ in 0..steps {
        let (next, rep) = solver.advance(&state, prev2.as_ref(), dt).map_err(|e| annotate(e.into()))?;
        let scale = tol * norm2(&next.u).max(T::one());
        max_div = max_div.max(rep.divergence_residual / scale);
        trajectory.push(next.clone());
        prev2 = Some(std::mem::replace(&mut state, next));
    }
    log::info!("{} level {level}: {cells} cells, {steps} steps of {dt}", case.name());
    let report = energy_error(solver.assembler(), &case.map, &trajectory, dt, case.nu, &*case.exact).map_err(annotate)?;
    Ok(LevelResult {
        level,
        h: case.h(level),
        dt,
        steps,
        cells,
        report,
        max_divergence_ratio: max_div,
        final_state: state,
    })
}

/// Runs `levels` refinement levels and tabulates the combined error norm.
pub fn convergence_study<T: Real>(
    case: &BenchmarkCase<T>,
    levels: usize,
    pairing: Pairing,
    config: &SolverConfig,
) -> Result<(ConvergenceTable, Vec<LevelResult<T>>), AnalysisError> {
    if levels < 2 {
        return Err(AnalysisError::Levels(levels));
    }
    let mut results = Vec::with_capacity(levels);
    for level in 0..levels {
        results.push(run_level(case, level, pairing, config)?);
    }
    let rows: Vec<_> = results
        .iter()
        .map(|r| (r.h.to_f64_lossy(), r.cells, r.dt.to_f64_lossy(), r.steps, r.report.combined.to_f64_lossy()))
        .collect();
    Ok((ConvergenceTable::from_levels(&rows)?, results))
}
