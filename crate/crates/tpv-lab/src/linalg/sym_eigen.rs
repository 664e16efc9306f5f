//! Symmetric eigendecomposition via cyclic two-sided Jacobi rotations.
//!
//! Deliberately a different algorithm from the one-sided SVD in `svd.rs`:
//! the two serve as independent routes for cross-checking each other on
//! PSD matrices, and this one also backs the PSD square-root factor used
//! by the OU noise simulator.

use super::matrix::Matrix;
use super::LinalgError;

const MAX_SWEEPS: usize = 60;

/// Eigendecomposition of a symmetric matrix: `m = q · diag(values) · qᵀ`.
///
/// Eigenvalues are sorted descending; `q` holds the eigenvectors as columns.
pub fn sym_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix), LinalgError> {
    if m.rows() != m.cols() {
        return Err(LinalgError::InvalidMatrix(
            "sym_eigen: matrix not square".into(),
        ));
    }
    if !m.is_finite() {
        return Err(LinalgError::InvalidMatrix(
            "sym_eigen: non-finite entries".into(),
        ));
    }
    let n = m.rows();
    let mut a = m.symmetrized();
    let mut q = Matrix::identity(n);
    let scale = a.max_abs().max(1e-300);

    for _sweep in 0..MAX_SWEEPS {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for r in (p + 1)..n {
                off = off.max(a.get(p, r).abs());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = a.get(p, r);
                if apr.abs() <= 1e-18 * scale {
                    continue;
                }
                let app = a.get(p, p);
                let arr = a.get(r, r);
                let tau = (arr - app) / (2.0 * apr);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (tau - (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // A <- Gᵀ A G on rows/columns p and r.
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akr = a.get(k, r);
                    a.set(k, p, c * akp - s * akr);
                    a.set(k, r, s * akp + c * akr);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let ark = a.get(r, k);
                    a.set(p, k, c * apk - s * ark);
                    a.set(r, k, s * apk + c * ark);
                }
                for k in 0..n {
                    let qkp = q.get(k, p);
                    let qkr = q.get(k, r);
                    q.set(k, p, c * qkp - s * qkr);
                    q.set(k, r, s * qkp + c * qkr);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &idx) in order.iter().enumerate() {
        for row in 0..n {
            vectors.set(row, col, q.get(row, idx));
        }
    }
    Ok((values, vectors))
}

/// Eigenvalues only, sorted descending.
pub fn sym_eigenvalues(m: &Matrix) -> Vec<f64> {
    sym_eigen(m).expect("sym_eigenvalues: invalid matrix").0
}

/// Factor L with L·Lᵀ = m for a symmetric PSD matrix, clipping eigenvalues
/// below `clip` (relative to the largest) to zero.
pub fn psd_sqrt_factor(m: &Matrix, clip: f64) -> Result<Matrix, LinalgError> {
    let (values, vectors) = sym_eigen(m)?;
    let top = values.first().copied().unwrap_or(0.0).max(0.0);
    let n = m.rows();
    let mut l = Matrix::zeros(n, n);
    for (j, &lambda) in values.iter().enumerate() {
        if lambda <= clip * top || lambda <= 0.0 {
            continue;
        }
        let root = lambda.sqrt();
        for i in 0..n {
            l.set(i, j, vectors.get(i, j) * root);
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    fn random_sym(n: usize, seed: u64) -> Matrix {
        let mut rng = StreamRng::new(seed);
        let g = Matrix::from_fn(n, n, |_, _| rng.normal());
        g.add_scaled(&g.transpose(), 1.0).scale(0.5)
    }

    #[test]
    fn reconstructs_symmetric_matrix() {
        let m = random_sym(8, 21);
        let (values, q) = sym_eigen(&m).unwrap();
        let lam = Matrix::from_fn(8, 8, |i, j| if i == j { values[i] } else { 0.0 });
        let back = q.matmul(&lam).matmul_nt(&q);
        assert!(back.add_scaled(&m, -1.0).max_abs() < 1e-10);
        let qtq = q.matmul_tn(&q);
        assert!(qtq.add_scaled(&Matrix::identity(8), -1.0).max_abs() < 1e-10);
    }

    #[test]
    fn diagonal_matrix_eigenvalues() {
        let m = Matrix::from_fn(3, 3, |i, j| if i == j { (3 - i) as f64 } else { 0.0 });
        let (values, _) = sym_eigen(&m).unwrap();
        assert_eq!(values, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn psd_sqrt_factor_roundtrip() {
        let mut rng = StreamRng::new(31);
        let g = Matrix::from_fn(6, 9, |_, _| rng.normal());
        let m = g.matmul_nt(&g); // PSD by construction
        let l = psd_sqrt_factor(&m, 1e-14).unwrap();
        let back = l.matmul_nt(&l);
        assert!(back.add_scaled(&m, -1.0).max_abs() < 1e-9 * m.max_abs());
    }
}
