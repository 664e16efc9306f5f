//! Compact SVD via one-sided Jacobi rotations.
//!
//! The working matrix is oriented so the side being orthogonalized is the
//! short one; accuracy is what matters at desk scale, not speed. Singular
//! triplets below `rel_tol * s_max` are discarded, which is the crate-wide
//! numerical-rank decision (see [`DEFAULT_RANK_REL_TOL`]).

use serde::{Deserialize, Serialize};

use super::matrix::{dot, Matrix};
use super::LinalgError;

/// Relative singular-value cutoff separating true rank from rounding noise.
pub const DEFAULT_RANK_REL_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 60;
/// A column pair counts as orthogonal when |b_p·b_q| <= ORTHO_TOL·‖b_p‖‖b_q‖.
const ORTHO_TOL: f64 = 1e-14;

/// Compact SVD `m = u · diag(s) · vᵀ` keeping only rank-revealing triplets.
///
/// `u` is rows×r and `v` is cols×r, both with orthonormal columns; `s` is
/// strictly positive and sorted descending.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompactSvd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
    pub rank: usize,
    pub rank_tolerance: f64,
}

impl CompactSvd {
    /// u · diag(s) · vᵀ.
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (j, &sj) in self.s.iter().enumerate() {
                us.set(i, j, us.get(i, j) * sj);
            }
        }
        us.matmul_nt(&self.v)
    }

    /// Σ 1/s_i² — the min-norm sensitivity sum.
    pub fn inverse_square_sum(&self) -> f64 {
        self.s.iter().map(|s| 1.0 / (s * s)).sum()
    }
}

/// One-sided Jacobi SVD with relative rank cutoff `rel_tol` in (0, 1).
pub fn compact_svd(m: &Matrix, rel_tol: f64) -> Result<CompactSvd, LinalgError> {
    if !m.is_finite() {
        return Err(LinalgError::InvalidMatrix(
            "compact_svd: non-finite entries".into(),
        ));
    }
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(LinalgError::InvalidMatrix(format!(
            "compact_svd: rel_tol {rel_tol} outside (0, 1)"
        )));
    }

    // Orthogonalize columns of the thin orientation: factor A (rows >= cols)
    // as A = W Vᵀ with W = U S, then swap factors back if we transposed.
    let transposed = m.rows() < m.cols();
    let work = if transposed { m.transpose() } else { m.clone() };
    let (tall, short) = (work.rows(), work.cols());

    // Column-major copies of the working matrix so rotations touch
    // contiguous memory.
    let mut b: Vec<Vec<f64>> = (0..short)
        .map(|j| (0..tall).map(|i| work.get(i, j)).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..short)
        .map(|j| {
            let mut col = vec![0.0; short];
            col[j] = 1.0;
            col
        })
        .collect();

    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..short {
            for q in (p + 1)..short {
                let (bp, bq) = pair_mut(&mut b, p, q);
                let app = dot(bp, bp);
                let aqq = dot(bq, bq);
                let apq = dot(bp, bq);
                if apq.abs() <= ORTHO_TOL * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (tau - (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                rotate(bp, bq, c, s);
                let (vp, vq) = pair_mut(&mut v, p, q);
                rotate(vp, vq, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    // Column norms are the singular values; sort descending.
    let mut order: Vec<usize> = (0..short).collect();
    let norms: Vec<f64> = b.iter().map(|col| dot(col, col).sqrt()).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let s_max = order.first().map_or(0.0, |&i| norms[i]);
    let cutoff = rel_tol * s_max;
    let rank = order.iter().filter(|&&i| norms[i] > cutoff).count();

    let mut u = Matrix::zeros(tall, rank);
    let mut vv = Matrix::zeros(short, rank);
    let mut s = Vec::with_capacity(rank);
    for (r, &idx) in order.iter().take(rank).enumerate() {
        let norm = norms[idx];
        s.push(norm);
        for i in 0..tall {
            u.set(i, r, b[idx][i] / norm);
        }
        for i in 0..short {
            vv.set(i, r, v[idx][i]);
        }
    }

    let (u_final, v_final) = if transposed { (vv, u) } else { (u, vv) };
    Ok(CompactSvd {
        u: u_final,
        s,
        v: v_final,
        rank,
        rank_tolerance: rel_tol,
    })
}

fn pair_mut(cols: &mut [Vec<f64>], p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(p < q);
    let (lo, hi) = cols.split_at_mut(q);
    (&mut lo[p], &mut hi[0])
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let xv = *xi;
        let yv = *yi;
        *xi = c * xv - s * yv;
        *yi = s * xv + c * yv;
    }
}
