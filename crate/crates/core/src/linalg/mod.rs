//! Dense kernels, the Schur-complement reduction of the k-commodity normal
//! matrix, and Woodbury-based inverse maintenance.

pub mod dense;
pub mod schur;
pub mod sparse;
pub mod woodbury;

use thiserror::Error;

pub use dense::{dense_solve, least_squares, Cholesky, DenseMatrix, LeastSquares, LuFactors};
pub use schur::{apply_reduced_inverse, assemble_e, BlockWeights, SchurCounters, SchurSystem};
pub use sparse::CsrMatrix;
pub use woodbury::InverseMaintenance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is numerically singular at pivot {pivot}")]
    Singular { pivot: usize },
    #[error("matrix is not positive definite at pivot {pivot}")]
    NotPositiveDefinite { pivot: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("weight block {block} entry {index} is not positive")]
    NonPositiveWeight { block: usize, index: usize },
    #[error("weight block {block} entry {index} = {value:e} has |ln| above 300")]
    WeightOutOfRange { block: usize, index: usize, value: f64 },
    #[error("low-rank update has a singular capacitance matrix")]
    UpdateSingular,
    #[error("maintained inverse failed its residual probe after a rebuild")]
    SingularSystem,
}
