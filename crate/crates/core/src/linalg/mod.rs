//! Dense linear algebra: matrices, linear solves, truncated SVD and vector statistics.

mod matrix;
mod solve;
mod stats;
mod svd;

pub use matrix::{dot, max_abs, norm2, Matrix};
pub use solve::{invert, solve_linear, Lu};
pub use stats::{vector_stats, StatSummary};
pub use svd::{truncated_svd, TruncatedSvd};

/// Elimination pivots below this magnitude mark a matrix as singular.
pub const SINGULAR_PIVOT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is singular: pivot {pivot:e} in column {column}")]
    SingularMatrix { column: usize, pivot: f64 },
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("statistics of an empty vector")]
    EmptyVector,
}
