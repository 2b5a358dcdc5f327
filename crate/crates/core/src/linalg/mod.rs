//! Dense and sparse linear-algebra kernels.
//!
//! Everything in the pipeline that factors or decomposes a matrix goes
//! through here: one-sided Jacobi SVD, Householder QR, partial-pivoting LU,
//! banded LU for the sparse step operators, the Kronecker product, and a
//! matrix-free power iteration for operator 2-norms.

mod banded;
mod dense;
mod kron;
mod lu;
mod norm;
mod qr;
mod sparse;
mod svd;
pub mod vec_ops;

pub use banded::BandedLu;
pub use dense::DenseMatrix;
pub use kron::kron;
pub use lu::{solve_dense, LuFactorization};
pub use norm::{largest_singular_value, FnOperator, LinearOperator, PowerIterationOptions};
pub use qr::qr;
pub use sparse::SparseMatrix;
pub use svd::{symmetric_extreme_eigenvalues, thin_svd, Svd};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("{op}: shape mismatch ({detail})")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is singular: pivot {pivot} has magnitude {magnitude:.3e}")]
    Singular { pivot: usize, magnitude: f64 },

    #[error("{method} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("adjoint check failed: |<Av,w> - <v,A'w>| = {gap:.3e} exceeds {tolerance:.3e}")]
    AdjointMismatch { gap: f64, tolerance: f64 },

    #[error("invalid sparse structure: {0}")]
    SparseStructure(String),
}
