//! Error norms, energy diagnostics, benchmark cases and convergence studies.

mod benchmark;
mod convergence;
mod norms;

use thiserror::Error;

use crate::fem::{FemError, QuadratureError};
use crate::map::MapError;
use crate::mesh::MeshError;
use crate::solver::SolverError;

pub use benchmark::{manufactured_2d, momentum_residual, tube_benchmark, BenchmarkCase, CaseKind, ExactSolution};
pub use convergence::{
    convergence_study, level_time_step, run_level, ConvergenceRow, ConvergenceTable, LevelResult, Pairing,
};
pub use norms::{
    energy_balance_terms, energy_error, k_norm, k_norm_fn, EnergyBalance, EnergyErrorReport, ExactVelocity,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("trajectory is missing step {expected} (found step {found})")]
    MissingSteps { expected: usize, found: usize },
    #[error("level {level}: error value {value} is not a positive finite number")]
    InvalidError { level: usize, value: f64 },
    #[error("a convergence study needs at least 2 levels, got {0}")]
    Levels(usize),
    #[error("level {level}: {source}")]
    Level { level: usize, source: Box<AnalysisError> },
}

#[cfg(test)]
mod tests;
