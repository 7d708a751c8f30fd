//! Per-step diagnostics as CSV.

use std::io::Write;
use std::path::{Path, PathBuf};

use super::IoError;
use crate::analysis::EnergyBalance;
use crate::scalar::Real;
use crate::solver::StepReport;

pub const DIAGNOSTICS_HEADER: &str = "step,time,kinetic_energy,divergence_residual,linear_iterations,linear_residual,\
kinetic_rate,dissipation,wall_work,open_boundary_power,forcing_power";

pub struct DiagnosticsWriter {
    path: PathBuf,
    out: std::io::BufWriter<std::fs::File>,
}

impl DiagnosticsWriter {
    pub fn create(path: &Path) -> Result<Self, IoError> {
        let io = |e| IoError::File { path: path.to_path_buf(), source: e };
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        writeln!(out, "{DIAGNOSTICS_HEADER}").map_err(io)?;
        Ok(DiagnosticsWriter { path: path.to_path_buf(), out })
    }

    /// Appends one row; `kinetic_energy` is `|u|_k^2 / 2`.
    pub fn record<T: Real>(
        &mut self,
        report: &StepReport<T>,
        kinetic_energy: T,
        balance: &EnergyBalance<T>,
    ) -> Result<(), IoError> {
        let f = |x: T| x.to_f64_lossy();
        writeln!(
            self.out,
            "{},{:e},{:e},{:e},{},{:e},{:e},{:e},{:e},{:e},{:e}",
            report.step,
            f(report.time),
            f(kinetic_energy),
            f(report.divergence_residual),
            report.linear_iterations,
            f(report.linear_residual),
            f(balance.kinetic_rate),
            f(balance.dissipation),
            f(balance.wall_work),
            f(balance.open_boundary_power),
            f(balance.forcing_power),
        )
        .map_err(|e| IoError::File { path: self.path.clone(), source: e })
    }

    pub fn finish(mut self) -> Result<(), IoError> {
        self.out.flush().map_err(|e| IoError::File { path: self.path.clone(), source: e })
    }
}
