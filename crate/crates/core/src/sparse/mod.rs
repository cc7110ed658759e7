//! Complex sparse matrices, exact and incomplete LU, and Krylov solvers.

mod csr;
mod ilu;
mod krylov;
mod lu;
pub mod scalar;

use thiserror::Error;

pub use csr::{spmv, SparseMatrixCSR};
pub use ilu::{exact_fill_level, ilu_factor, ilu_factor_shifted, ilu_solve, IluFactors};
pub use krylov::{
    cg, gmres, no_observer, CgOptions, ConvergenceLog, GmresOptions, IterationRecord,
    KrylovOutcome, Observation, ResidualGate,
};
pub use lu::{lu_factor, lu_factor_ordered, lu_solve, LuFactors};
pub use scalar::{KrylovVector, Scalar};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("invalid sparse structure: {0}")]
    InvalidStructure(String),

    #[error("singular pivot at elimination step {row}")]
    SingularPivot { row: usize },

    #[error("zero pivot in incomplete factorization at row {row}")]
    ZeroPivot { row: usize },

    #[error("missing diagonal entry in row {row}")]
    MissingDiagonal { row: usize },

    #[error("solver breakdown at iteration {iteration}: {detail}")]
    Breakdown { iteration: usize, detail: String },
}
