//! Finite element machinery on the reference mesh.

pub mod assembly;
pub mod basis;
pub mod geometry;
pub mod quadrature;
pub mod space;
pub mod sparse;

use thiserror::Error;

use crate::map::MapError;

pub use assembly::{
    assemble_step, boundary_flux, boundary_flux_correction, divergence_weights, AssembledStep, Assembler,
    StepBlocks, StepData, StressForm, TractionField, VectorField, Viscosity,
};
pub use basis::LagrangeBasis;
pub use geometry::CellGeometry;
pub use quadrature::{quadrature, QuadratureError, QuadratureRule};
pub use space::{NodeClass, TaylorHoodSpace};
pub use sparse::CsrMatrix;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("Taylor-Hood degree m = {0} is not implemented (only m = 1)")]
    UnsupportedDegree(usize),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("dimension mismatch: space is {space}-dimensional, map is {map}-dimensional")]
    DimensionMismatch { space: usize, map: usize },
    #[error("field length {found} does not match {expected} dofs")]
    FieldLength { expected: usize, found: usize },
    #[error("non-finite value at node {node} (x = {point:?})")]
    NonFinite { node: usize, point: [f64; 3] },
}
