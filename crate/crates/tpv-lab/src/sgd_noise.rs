//! SGD stationary-noise machinery: exact per-sample and mini-batch gradient
//! covariance, the linearized OU dynamics δw_{t+1} = (I−ηH)δw_t − ηξ_t, the
//! stationary covariance via the discrete Lyapunov equation, and a direct
//! OU simulator for cross-checking.

use thiserror::Error;

use crate::linalg::lyapunov::{
    discrete_lyapunov_solve, spectral_radius_estimate, POWER_ITER_STEPS,
};
use crate::linalg::{LinalgError, Matrix};
use crate::rng::StreamRng;

#[derive(Debug, Error)]
pub enum SgdNoiseError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("dimension mismatch: {0}")]
    Dim(String),
    #[error("insufficient data: need at least {required} samples, got {got}")]
    InsufficientData { required: usize, got: usize },
}

/// Per-sample and mini-batch gradient covariances at a fixed parameter
/// point; sigma_xi = sigma_sample / batch entrywise.
#[derive(Debug, Clone)]
pub struct GradientCovariance {
    pub sigma_sample: Matrix,
    pub sigma_xi: Matrix,
    pub batch: usize,
}

impl GradientCovariance {
    pub fn new(j: &Matrix, residuals: &[f64], batch: usize) -> Result<Self, SgdNoiseError> {
        let sigma_sample = exact_sample_covariance(j, residuals)?;
        let sigma_xi = minibatch_noise_covariance(&sigma_sample, batch);
        Ok(GradientCovariance {
            sigma_sample,
            sigma_xi,
            batch,
        })
    }
}

/// Exact per-sample gradient covariance for squared loss:
/// Σ_sample = (1/n)·Jᵀ·diag(ε_i²)·J − (1/n²)·(Jᵀε)(Jᵀε)ᵀ.
pub fn exact_sample_covariance(j: &Matrix, residuals: &[f64]) -> Result<Matrix, SgdNoiseError> {
    let n = j.rows();
    if residuals.len() != n {
        return Err(SgdNoiseError::Dim(format!(
            "residuals length {} vs {} jacobian rows",
            residuals.len(),
            n
        )));
    }
    let p = j.cols();
    // (Jᵀ A₂ J)_{ab} = Σ_i ε_i² J_ia J_ib via a row-scaled copy.
    let mut scaled = j.clone();
    for (i, &eps) in residuals.iter().enumerate() {
        for v in scaled.row_mut(i) {
            *v *= eps;
        }
    }
    let first = scaled.matmul_tn(&scaled).scale(1.0 / n as f64);
    let mean_grad = {
        let g = j.matvec_t(residuals); // Jᵀε
        Matrix::column(&g)
    };
    let mut out = first;
    let coeff = 1.0 / (n as f64 * n as f64);
    for a in 0..p {
        let ga = mean_grad.get(a, 0);
        for b in 0..p {
            out.set(a, b, out.get(a, b) - coeff * ga * mean_grad.get(b, 0));
        }
    }
    Ok(out.symmetrized())
}

/// Σ_ξ = Σ_sample / b for mini-batches of size b sampled uniformly with
/// replacement. Note b = n does not vanish: with-replacement batches still
/// carry noise.
pub fn minibatch_noise_covariance(sample_cov: &Matrix, batch: usize) -> Matrix {
    assert!(batch >= 1);
    sample_cov.scale(1.0 / batch as f64)
}

/// Stationary parameter covariance of linearized SGD around a minimum:
/// solves C = (I−ηH)·C·(I−ηH)ᵀ + η²Σ_ξ.
///
/// Requires every eigenvalue of `h` in (0, 2/η) so the dynamics are stable;
/// checked with a 20-step power-iteration estimate on I−ηH.
pub fn stationary_covariance(
    h: &Matrix,
    sigma_xi: &Matrix,
    eta: f64,
) -> Result<Matrix, SgdNoiseError> {
    assert!(eta > 0.0);
    let p = h.rows();
    if h.cols() != p || sigma_xi.rows() != p || sigma_xi.cols() != p {
        return Err(SgdNoiseError::Dim("stationary_covariance shapes".into()));
    }
    let a = Matrix::identity(p).add_scaled(h, -eta);
    let radius = spectral_radius_estimate(&a, POWER_ITER_STEPS);
    if radius >= 1.0 {
        return Err(SgdNoiseError::Linalg(LinalgError::UnstableDynamics {
            radius,
        }));
    }
    let q = sigma_xi.scale(eta * eta);
    Ok(discrete_lyapunov_solve(&a, &q)?)
}

/// Simulate the OU recursion δw_{t+1} = (I−ηH)δw_t − η·L·z_t with z_t
/// standard normal and L·Lᵀ = Σ_ξ, returning the post-burn-in second
/// moment estimate of δw.
pub fn simulate_ou(
    h: &Matrix,
    sigma_xi_factor: &Matrix,
    eta: f64,
    steps: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Matrix, SgdNoiseError> {
    assert!(steps > burn_in);
    let p = h.rows();
    if sigma_xi_factor.rows() != p {
        return Err(SgdNoiseError::Dim("simulate_ou factor rows".into()));
    }
    let a = Matrix::identity(p).add_scaled(h, -eta);
    let radius = spectral_radius_estimate(&a, POWER_ITER_STEPS);
    if radius >= 1.0 {
        return Err(SgdNoiseError::Linalg(LinalgError::UnstableDynamics {
            radius,
        }));
    }
    let m = sigma_xi_factor.cols();
    let mut rng = StreamRng::new(seed);
    let mut dw = vec![0.0; p];
    let mut z = vec![0.0; m];
    let mut second = Matrix::zeros(p, p);
    let mut kept = 0usize;
    for step in 1..=steps {
        let drift = a.matvec(&dw);
        rng.fill_normal(&mut z);
        let kick = sigma_xi_factor.matvec(&z);
        for ((w, d), k) in dw.iter_mut().zip(drift).zip(kick) {
            *w = d - eta * k;
        }
        if step > burn_in {
            kept += 1;
            for i in 0..p {
                for jj in 0..p {
                    second.set(i, jj, second.get(i, jj) + dw[i] * dw[jj]);
                }
            }
        }
    }
    Ok(second.scale(1.0 / kept as f64))
}

/// Population variance of the residual vector (mean subtracted).
pub fn residual_variance(residuals: &[f64]) -> Result<f64, SgdNoiseError> {
    let n = residuals.len();
    if n < 2 {
        return Err(SgdNoiseError::InsufficientData { required: 2, got: n });
    }
    let mean = residuals.iter().sum::<f64>() / n as f64;
    Ok(residuals.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n as f64)
}
