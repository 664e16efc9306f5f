//! Pseudoinverse and minimum-norm solves on top of the compact SVD.

use super::svd::CompactSvd;
use super::LinalgError;

/// Minimum-norm stationary point of ½‖M x − rhs‖² given the compact SVD of
/// M: x = V · S⁻¹ · Uᵀ · rhs. The result lies in the row space of M; any
/// null-space component is zero by construction.
pub fn min_norm_solve(svd: &CompactSvd, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if rhs.len() != svd.u.rows() {
        return Err(LinalgError::DimMismatch {
            context: "min_norm_solve rhs",
            expected: svd.u.rows(),
            got: rhs.len(),
        });
    }
    let mut coeffs = svd.u.matvec_t(rhs);
    for (c, &s) in coeffs.iter_mut().zip(&svd.s) {
        *c /= s;
    }
    Ok(svd.v.matvec(&coeffs))
}

/// Ridge-shrunk solve x = V · diag(s/(s²+λ)) · Uᵀ · rhs, the λ>0 analog of
/// [`min_norm_solve`].
pub fn ridge_solve(svd: &CompactSvd, rhs: &[f64], lambda: f64) -> Result<Vec<f64>, LinalgError> {
    if rhs.len() != svd.u.rows() {
        return Err(LinalgError::DimMismatch {
            context: "ridge_solve rhs",
            expected: svd.u.rows(),
            got: rhs.len(),
        });
    }
    let mut coeffs = svd.u.matvec_t(rhs);
    for (c, &s) in coeffs.iter_mut().zip(&svd.s) {
        *c *= s / (s * s + lambda);
    }
    Ok(svd.v.matvec(&coeffs))
}
