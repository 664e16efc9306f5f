//! Discrete Lyapunov solve C = A C Aᵀ + Q by fixed-point iteration.
//!
//! At desk scale (p of order a few hundred) the iteration is trivially
//! correct and self-verifying; no Schur machinery needed.

use super::matrix::Matrix;
use super::LinalgError;

const REL_CHANGE_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 1_000_000;
/// Power-iteration steps for the spectral-radius estimate.
pub const POWER_ITER_STEPS: usize = 20;

/// Estimate the spectral radius of `a` with a fixed number of power
/// iterations from a deterministic quasi-random start vector.
///
/// The growth ratios of the later iterations are averaged geometrically,
/// which converges to |λ_max| even for non-normal matrices where a single
/// ratio would report transient growth instead.
pub fn spectral_radius_estimate(a: &Matrix, steps: usize) -> f64 {
    assert_eq!(a.rows(), a.cols());
    let n = a.rows();
    if n == 0 || steps == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.37 * ((i as f64 + 1.0).sin()))
        .collect();
    let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= norm0;
    }
    let mut log_growth = Vec::with_capacity(steps);
    for _ in 0..steps {
        let w = a.matvec(&v);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        log_growth.push(norm.ln());
        v = w.iter().map(|x| x / norm).collect();
    }
    let tail = &log_growth[steps / 2..];
    (tail.iter().sum::<f64>() / tail.len() as f64).exp()
}

/// Solve C − A C Aᵀ = Q for symmetric C, iterating C ← A C Aᵀ + Q from
/// C₀ = Q until the relative change drops below 1e-12.
///
/// Requires spectral radius of `a` below one (checked by a power-iteration
/// estimate) and symmetric `q`.
pub fn discrete_lyapunov_solve(a: &Matrix, q: &Matrix) -> Result<Matrix, LinalgError> {
    if a.rows() != a.cols() || q.rows() != q.cols() || a.rows() != q.rows() {
        return Err(LinalgError::DimMismatch {
            context: "discrete_lyapunov_solve",
            expected: a.rows(),
            got: q.rows(),
        });
    }
    if !a.is_finite() || !q.is_finite() {
        return Err(LinalgError::InvalidMatrix(
            "discrete_lyapunov_solve: non-finite input".into(),
        ));
    }
    let radius = spectral_radius_estimate(a, POWER_ITER_STEPS);
    if radius >= 1.0 {
        return Err(LinalgError::UnstableDynamics { radius });
    }

    let q_sym = q.symmetrized();
    let mut c = q_sym.clone();
    for _ in 0..MAX_ITERATIONS {
        let ac = a.matmul(&c);
        let next = ac.matmul_nt(a).add_scaled(&q_sym, 1.0).symmetrized();
        let change = next.add_scaled(&c, -1.0).frobenius_norm();
        let scale = next.frobenius_norm().max(1e-300);
        c = next;
        if change <= REL_CHANGE_TOL * scale {
            break;
        }
    }
    Ok(c)
}

/// ‖C − A C Aᵀ − Q‖_F / ‖Q‖_F, the defining-equation residual.
pub fn lyapunov_residual(a: &Matrix, q: &Matrix, c: &Matrix) -> f64 {
    let acat = a.matmul(c).matmul_nt(a);
    let defect = c.add_scaled(&acat, -1.0).add_scaled(q, -1.0);
    defect.frobenius_norm() / q.frobenius_norm().max(1e-300)
}
