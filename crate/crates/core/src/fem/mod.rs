//! P1 finite-element machinery: lumped mass, anisotropic weighted stiffness,
//! and the sparse linear solvers used by the time integrator.

mod assembly;
mod solve;
mod sparse;

pub use assembly::{assemble_stiffness, lumped_inner, lumped_mass, FemSpace, SparseOperator};
pub use solve::{
    bicgstab, pcg, reverse_cuthill_mckee, solve_linear, BandedLu, FactoredSystem, Ilu0, SolveError,
    SolverOptions, DIRECT_SOLVE_LIMIT,
};
pub use sparse::CsrMatrix;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("negative coefficient {value:e} at index {index}")]
    NegativeCoefficient { index: usize, value: f64 },
    #[error("non-finite coefficient")]
    NonFinite,
    #[error(transparent)]
    Solve(#[from] SolveError),
}
