//! Dense linear algebra primitives: compact SVD, pseudoinverse solves,
//! operator-only conjugate gradient, discrete Lyapunov, and trace forms.
//!
//! Everything is f64; the quantities downstream span several orders of
//! magnitude and single precision would contaminate the tolerance checks.

pub mod cg;
pub mod lyapunov;
pub mod matrix;
pub mod solve;
pub mod svd;
pub mod sym_eigen;
pub mod trace;

pub use cg::{ridge_dual_solve, CgSolution, FnOperator, LinearOperator};
pub use lyapunov::{discrete_lyapunov_solve, lyapunov_residual, spectral_radius_estimate};
pub use matrix::Matrix;
pub use solve::{min_norm_solve, ridge_solve};
pub use svd::{compact_svd, CompactSvd, DEFAULT_RANK_REL_TOL};
pub use sym_eigen::{psd_sqrt_factor, sym_eigen};
pub use trace::{trace_product, PerturbationCovariance};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("unstable dynamics: spectral radius estimate {radius} >= 1")]
    UnstableDynamics { radius: f64 },
    #[error("rank-deficient matrix: rank {rank} < required {required}")]
    RankDeficient { rank: usize, required: usize },
}
