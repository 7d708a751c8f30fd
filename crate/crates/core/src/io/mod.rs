//! Configuration files, mesh import and result output.

mod checkpoint;
mod config;
mod diagnostics;
mod gmsh;
mod vtk;

use std::path::PathBuf;

use thiserror::Error;

use crate::fem::FemError;
use crate::map::MapError;
use crate::mesh::MeshError;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use config::{
    build_map, build_mesh, build_run, load_config, parse_config, BcConfig, BenchmarkConfig, MapConfig, MeshConfig,
    OutputConfig, PhysicsConfig, RunConfig, RunSetup, SmagorinskyConfig, SolverSection, TimeConfig,
    TubeLabelConfig,
};
pub use diagnostics::{DiagnosticsWriter, DIAGNOSTICS_HEADER};
pub use gmsh::{read_gmsh, write_gmsh};
pub use vtk::{q_criterion, read_vtk, vertex_fields, write_vtk, VertexFields, VtkGrid};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("config{}{path}: {message}", if path.is_empty() { "" } else { " field " })]
    Config { path: String, message: String },
    #[error("{}: {message}", path.display())]
    Checkpoint { path: PathBuf, message: String },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Fem(#[from] FemError),
}

#[cfg(test)]
mod tests;
