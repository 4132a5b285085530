//! Sparse symmetric linear algebra.
//!
//! Matrices are kept in lower-triangular compressed-column storage. The
//! factorization is an up-looking LDLᵀ on a fill-reducing ordering. Singular
//! positive semidefinite matrices are handled in two ways: without a null-space
//! hint, vanishing pivots are dropped and the rank is reported; with a hint,
//! the matrix is bordered by its null-space basis so that generalized
//! determinants and minimum-norm solves come out of one nonsingular
//! factorization.

mod ldl;
mod market;
mod matrix;
mod ordering;

pub use ldl::{factor_ldl, factor_ldl_with, Factorization, LdlOptions, NullSpace};
pub use market::{read_matrix_market, write_matrix_market};
pub use matrix::{CsrMatrix, SparseSymMatrix};
pub use ordering::minimum_degree;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index ({row}, {col}) out of bounds for dimension {n}")]
    OutOfBounds { row: usize, col: usize, n: usize },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is indefinite: pivot {value:.3e} at step {step}")]
    Indefinite { step: usize, value: f64 },

    #[error("null space larger than declared: {found} vanishing pivots beyond the hint")]
    SingularBeyondHint { found: usize },

    #[error("declared null vector is not annihilated (residual {residual:.3e})")]
    HintViolated { residual: f64 },

    #[error("matrix is rank deficient (rank {rank} of {n}); use pseudo_solve")]
    RankDeficient { rank: usize, n: usize },

    #[error("rank-deficient factorization without a null-space hint")]
    UnknownNullSpace,

    #[error("matrix market: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
