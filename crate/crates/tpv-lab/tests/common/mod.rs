//! Test-side numerical oracles, deliberately naive and independent of the
//! production linear algebra.

use tpv_lab::linalg::Matrix;
use tpv_lab::rng::StreamRng;

/// Gauss-Jordan inverse with partial pivoting.
pub fn gauss_jordan_inverse(m: &Matrix) -> Matrix {
    let n = m.rows();
    assert_eq!(n, m.cols());
    let mut a = m.clone();
    let mut inv = Matrix::identity(n);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| {
                a.get(i, col)
                    .abs()
                    .partial_cmp(&a.get(j, col).abs())
                    .unwrap()
            })
            .unwrap();
        if pivot_row != col {
            for j in 0..n {
                let tmp = a.get(col, j);
                a.set(col, j, a.get(pivot_row, j));
                a.set(pivot_row, j, tmp);
                let tmp = inv.get(col, j);
                inv.set(col, j, inv.get(pivot_row, j));
                inv.set(pivot_row, j, tmp);
            }
        }
        let pivot = a.get(col, col);
        assert!(pivot.abs() > 1e-300, "singular matrix in oracle inverse");
        for j in 0..n {
            a.set(col, j, a.get(col, j) / pivot);
            inv.set(col, j, inv.get(col, j) / pivot);
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a.get(row, col);
            if factor == 0.0 {
                continue;
            }
            for j in 0..n {
                a.set(row, j, a.get(row, j) - factor * a.get(col, j));
                inv.set(row, j, inv.get(row, j) - factor * inv.get(col, j));
            }
        }
    }
    inv
}

/// `cols` orthonormal columns of length `rows` via modified Gram-Schmidt on
/// Gaussian draws.
pub fn gram_schmidt_columns(rows: usize, cols: usize, rng: &mut StreamRng) -> Matrix {
    assert!(cols <= rows);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cols);
    while basis.len() < cols {
        let mut v: Vec<f64> = (0..rows).map(|_| rng.normal()).collect();
        for b in &basis {
            let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= proj * bi;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue; // degenerate draw, resample
        }
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        basis.push(v);
    }
    Matrix::from_fn(rows, cols, |i, j| basis[j][i])
}

#[allow(dead_code)]
pub fn frobenius_rel_err(a: &Matrix, b: &Matrix) -> f64 {
    a.add_scaled(b, -1.0).frobenius_norm() / b.frobenius_norm().max(1e-300)
}
