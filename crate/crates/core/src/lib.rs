//! Quasi-Lagrangian Taylor–Hood finite elements for the incompressible
//! Navier–Stokes equations in time-dependent domains.
//!
//! The mesh and all finite element spaces live on the fixed reference
//! domain; domain motion enters only through a space-time map `xi(x, t)`
//! and its derivatives. The core is generic over the scalar type (`f32` or
//! `f64`); the aliases below fix it to `f64` unless suffixed with `32`.

pub mod analysis;
pub mod cli;
pub mod expr;
pub mod fem;
pub mod io;
pub mod linalg;
pub mod map;
pub mod mesh;
pub mod scalar;
pub mod solver;

use thiserror::Error;

pub type Mesh = mesh::SimplicialMesh<f64>;
pub type Mesh32 = mesh::SimplicialMesh<f32>;
pub type Map = map::SpaceTimeMap<f64>;
pub type Map32 = map::SpaceTimeMap<f32>;
pub type Space = fem::TaylorHoodSpace<f64>;
pub type Space32 = fem::TaylorHoodSpace<f32>;
pub type State = solver::FlowState<f64>;
pub type State32 = solver::FlowState<f32>;
pub type Case = analysis::BenchmarkCase<f64>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] mesh::MeshError),
    #[error(transparent)]
    Map(#[from] map::MapError),
    #[error(transparent)]
    Fem(#[from] fem::FemError),
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
    #[error(transparent)]
    Io(#[from] io::IoError),
    #[error("{0}")]
    Input(String),
}
