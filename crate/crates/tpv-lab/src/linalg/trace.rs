//! Tr(H·C) for the covariance representations used throughout: the dense
//! covariance is never materialized when a structured form is available.

use serde::{Deserialize, Serialize};

use super::matrix::{dot, Matrix};
use super::LinalgError;

/// Tagged parameter-perturbation covariance C.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum PerturbationCovariance {
    /// σ² I.
    Isotropic(f64),
    /// diag(d).
    Diagonal(Vec<f64>),
    /// L·Lᵀ for a p×r factor.
    LowRank(Matrix),
    /// Full p×p matrix.
    Dense(Matrix),
}

impl PerturbationCovariance {
    /// Side length of the covariance, if it pins one (isotropic scales to
    /// whatever it is traced against).
    pub fn dim(&self) -> Option<usize> {
        match self {
            PerturbationCovariance::Isotropic(_) => None,
            PerturbationCovariance::Diagonal(d) => Some(d.len()),
            PerturbationCovariance::LowRank(l) => Some(l.rows()),
            PerturbationCovariance::Dense(c) => Some(c.rows()),
        }
    }

    pub fn trace(&self, dim: usize) -> f64 {
        match self {
            PerturbationCovariance::Isotropic(sigma2) => sigma2 * dim as f64,
            PerturbationCovariance::Diagonal(d) => d.iter().sum(),
            PerturbationCovariance::LowRank(l) => l.as_slice().iter().map(|x| x * x).sum(),
            PerturbationCovariance::Dense(c) => c.trace(),
        }
    }
}

/// Tr(h · C) without materializing dense C for the structured forms:
/// isotropic is σ²·Tr(h), diagonal is Σ h_ii d_i, and low-rank uses the
/// cyclic identity Tr(h L Lᵀ) = Tr(Lᵀ h L).
pub fn trace_product(h: &Matrix, c: &PerturbationCovariance) -> Result<f64, LinalgError> {
    if h.rows() != h.cols() {
        return Err(LinalgError::DimMismatch {
            context: "trace_product h not square",
            expected: h.rows(),
            got: h.cols(),
        });
    }
    if let Some(d) = c.dim() {
        if d != h.rows() {
            return Err(LinalgError::DimMismatch {
                context: "trace_product covariance",
                expected: h.rows(),
                got: d,
            });
        }
    }
    let p = h.rows();
    Ok(match c {
        PerturbationCovariance::Isotropic(sigma2) => sigma2 * h.trace(),
        PerturbationCovariance::Diagonal(diag) => {
            (0..p).map(|i| h.get(i, i) * diag[i]).sum()
        }
        PerturbationCovariance::LowRank(l) => {
            // Σ_j l_jᵀ h l_j over the factor columns.
            let hl = h.matmul(l);
            let mut acc = 0.0;
            for i in 0..p {
                acc += dot(l.row(i), hl.row(i));
            }
            acc
        }
        PerturbationCovariance::Dense(cmat) => {
            let mut acc = 0.0;
            for i in 0..p {
                acc += dot(h.row(i), cmat.transpose().row(i));
            }
            // Tr(h·C) = Σ_ij h_ij C_ji; C symmetric in practice, but use the
            // general contraction to stay exact for any input.
            acc
        }
    })
}
