//! Closed-form TPV quantities: H_eff and the trace form, label-noise TPV in
//! min-norm and ridge regimes, SGD-noise and quantization TPV, and the
//! Gauss-Newton Hessian-trace proxy.
//!
//! Two routes exist for the label-noise spectrum: an explicit-Jacobian one
//! (exact, for desk-scale p) and a Gram/NTK one that never materializes J
//! or the p×p H_eff (for wide networks). They agree to high precision where
//! both are feasible and are cross-checked in the tests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::matrix::dot;
use crate::linalg::svd::compact_svd;
use crate::linalg::{trace_product, LinalgError, Matrix, PerturbationCovariance};
use crate::nn::ntk::{ntk_gram, NtkSide};
use crate::nn::Network;

pub use crate::linalg::DEFAULT_RANK_REL_TOL;

/// Relative eigenvalue cutoff for the Gram-route spectrum. Gram eigenvalues
/// are singular values squared, and their noise floor sits near machine
/// epsilon times the top eigenvalue, so this is deliberately looser than
/// DEFAULT_RANK_REL_TOL squared.
pub const GRAM_EIGEN_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

/// Second moment of the output-parameter Jacobian, (1/n)JᵀJ.
#[derive(Debug, Clone)]
pub struct HEff {
    pub matrix: Matrix,
    pub n_samples: usize,
    pub source_split: Split,
}

/// H_eff = (1/n)·JᵀJ from an (n·K)×p Jacobian.
pub fn estimate_heff(jac: &Matrix, n: usize, split: Split) -> Result<HEff, TheoryError> {
    if n == 0 {
        return Err(TheoryError::EmptyDataset);
    }
    let matrix = jac.matmul_tn(jac).scale(1.0 / n as f64).symmetrized();
    Ok(HEff {
        matrix,
        n_samples: n,
        source_split: split,
    })
}

/// TPV = Tr(H_eff·C).
pub fn tpv_trace(h: &HEff, c: &PerturbationCovariance) -> Result<f64, TheoryError> {
    Ok(trace_product(&h.matrix, c)?)
}

/// Linear-regression label-noise TPV, σ_ε²·Tr((XXᵀ)⁻¹), valid in the
/// overparameterized regime d ≥ n with X of full row rank.
pub fn tpv_label_linear(x_train: &Matrix, sigma_eps2: f64) -> Result<f64, TheoryError> {
    let n = x_train.rows();
    let d = x_train.cols();
    if d < n {
        return Err(TheoryError::Linalg(LinalgError::RankDeficient {
            rank: d,
            required: n,
        }));
    }
    let svd = compact_svd(x_train, DEFAULT_RANK_REL_TOL)?;
    if svd.rank < n {
        return Err(TheoryError::Linalg(LinalgError::RankDeficient {
            rank: svd.rank,
            required: n,
        }));
    }
    Ok(sigma_eps2 * svd.inverse_square_sum())
}

/// Training-Jacobian singular values paired with the test-side diagonal
/// B_ii = v_iᵀ·H_eff(test)·v_i, plus the ridge parameter for shrunk
/// variants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelNoiseSpectrum {
    pub s: Vec<f64>,
    pub b_diag: Vec<f64>,
    pub lambda: f64,
}

/// Build the spectrum from an explicit training Jacobian and a test-side
/// H_eff. Only the diagonal of the congruence Vᵀ·H·V is formed.
pub fn build_label_noise_spectrum(
    j_train: &Matrix,
    h_eff_test: &HEff,
    lambda: f64,
) -> Result<LabelNoiseSpectrum, TheoryError> {
    if j_train.cols() != h_eff_test.matrix.rows() {
        return Err(TheoryError::Linalg(LinalgError::DimMismatch {
            context: "label noise spectrum p",
            expected: j_train.cols(),
            got: h_eff_test.matrix.rows(),
        }));
    }
    let svd = compact_svd(j_train, DEFAULT_RANK_REL_TOL)?;
    let hv = h_eff_test.matrix.matmul(&svd.v); // p×r
    let p = j_train.cols();
    let mut b_diag = Vec::with_capacity(svd.rank);
    for i in 0..svd.rank {
        let mut acc = 0.0;
        for row in 0..p {
            acc += svd.v.get(row, i) * hv.get(row, i);
        }
        b_diag.push(acc);
    }
    Ok(LabelNoiseSpectrum {
        s: svd.s,
        b_diag,
        lambda,
    })
}

/// Gram-route spectrum for scalar-output networks of any width: the
/// training NTK K = J·Jᵀ supplies s_i and the left singular vectors, and
/// B_ii = E_test[(u_iᵀ·J_tr·g(x))²]/s_i² follows from the cross-NTK without
/// ever forming J or the p×p H_eff.
pub fn label_noise_spectrum_gram(
    net: &Network,
    xs_train: &Matrix,
    xs_test: &Matrix,
    lambda: f64,
) -> Result<LabelNoiseSpectrum, TheoryError> {
    let side_tr = NtkSide::build(net, xs_train)?;
    let side_te = NtkSide::build(net, xs_test)?;
    let k_train = ntk_gram(net, &side_tr, &side_tr).symmetrized();
    let eig = compact_svd(&k_train, GRAM_EIGEN_REL_TOL)?;
    let s: Vec<f64> = eig.s.iter().map(|lam| lam.sqrt()).collect();

    let k_cross = ntk_gram(net, &side_tr, &side_te); // n_tr × n_te
    let projected = eig.u.matmul_tn(&k_cross); // r × n_te
    let n_te = xs_test.rows() as f64;
    let mut b_diag = Vec::with_capacity(s.len());
    for (i, &si) in s.iter().enumerate() {
        let row = projected.row(i);
        let mean_sq = dot(row, row) / n_te;
        b_diag.push(mean_sq / (si * si));
    }
    Ok(LabelNoiseSpectrum { s, b_diag, lambda })
}

/// Label-noise TPV σ_ε²·Σ B_ii/s_i² (min-norm, λ = 0). With λ > 0 the
/// directions are ridge-shrunk: σ_ε²·Σ B_ii·s_i²/(s_i²+λ)².
pub fn tpv_label_nonlinear(
    spec: &LabelNoiseSpectrum,
    sigma_eps2: f64,
) -> Result<f64, TheoryError> {
    if spec.s.iter().any(|&s| s <= 0.0) {
        return Err(TheoryError::InvalidSpectrum(
            "non-positive singular value".into(),
        ));
    }
    if spec.s.len() != spec.b_diag.len() {
        return Err(TheoryError::InvalidSpectrum(
            "s and b_diag length mismatch".into(),
        ));
    }
    let sum: f64 = spec
        .s
        .iter()
        .zip(&spec.b_diag)
        .map(|(&s, &b)| {
            if spec.lambda == 0.0 {
                b / (s * s)
            } else {
                let shrink = s / (s * s + spec.lambda);
                b * shrink * shrink
            }
        })
        .sum();
    Ok(sigma_eps2 * sum)
}

/// Training-set TPV under ridge shrinkage:
/// σ_ε²·(1/n)·Σ (s_i²/(s_i²+λ))². At λ = 0 this is σ_ε²·r/n.
pub fn tpv_train_ridge_closed_form(s: &[f64], lambda: f64, sigma_eps2: f64, n: usize) -> f64 {
    let sum: f64 = s
        .iter()
        .map(|&si| {
            let f = si * si / (si * si + lambda);
            f * f
        })
        .sum();
    sigma_eps2 * sum / n as f64
}

/// SGD stationary-noise TPV: η·σ_res²·Tr(∇²L)/(2b).
pub fn tpv_sgd_theoretical(eta: f64, batch: usize, sigma_res2: f64, hessian_trace: f64) -> f64 {
    assert!(eta > 0.0 && batch >= 1);
    eta * sigma_res2 * hessian_trace / (2.0 * batch as f64)
}

/// Quantization TPV: δ²·Tr(∇²L)/12 for per-coordinate Unif(−δ/2, δ/2).
pub fn tpv_quantization(delta: f64, hessian_trace: f64) -> f64 {
    assert!(delta >= 0.0);
    delta * delta * hessian_trace / 12.0
}

/// Gauss-Newton Hessian-trace proxy Tr((1/n)JᵀJ) = ‖J‖_F²/n, valid at
/// small residuals.
pub fn hessian_trace_proxy(jac: &Matrix, n: usize) -> f64 {
    assert!(n > 0);
    let f = jac.frobenius_norm();
    f * f / n as f64
}

/// Same proxy from per-sample NTK diagonal entries — no Jacobian storage,
/// usable at any width (scalar output only).
pub fn hessian_trace_proxy_gram(net: &Network, xs: &Matrix) -> Result<f64, TheoryError> {
    let side = NtkSide::build(net, xs)?;
    let n = xs.rows();
    let depth = net.config.depth();
    let mut total = 0.0;
    for i in 0..n {
        for l in 0..depth {
            let d = side.deltas[l].row(i);
            let a = side.activations[l].row(i);
            total += dot(d, d) * (dot(a, a) + 1.0);
        }
    }
    Ok(total / n as f64)
}

/// Dense finite-difference trace of the loss Hessian — the audit path for
/// the Gauss-Newton proxy, O(p) loss evaluations, intended for p ≤ ~200.
pub fn fd_hessian_trace(net: &Network, xs: &Matrix, ys: &Matrix) -> Result<f64, TheoryError> {
    let l0 = net.loss_mse(xs, ys)?;
    let mut trace = 0.0;
    for j in 0..net.param_count() {
        let h = 1e-4 * (1.0 + net.params.0[j].abs());
        let mut plus = net.clone();
        plus.params.0[j] += h;
        let mut minus = net.clone();
        minus.params.0[j] -= h;
        let lp = plus.loss_mse(xs, ys)?;
        let lm = minus.loss_mse(xs, ys)?;
        trace += (lp - 2.0 * l0 + lm) / (h * h);
    }
    Ok(trace)
}
