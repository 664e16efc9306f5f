//! Dense row-major matrix with the handful of BLAS-like kernels the rest of
//! the crate is built on. Inner loops are written over contiguous rows so
//! they autovectorize; at desk scale (p up to a few thousand) this is plenty.

use serde::{Deserialize, Serialize};

use super::LinalgError;

/// Dense matrix, row-major storage, always f64.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimMismatch {
                context: "Matrix::from_vec",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Column vector (n×1) from a slice.
    pub fn column(v: &[f64]) -> Self {
        Matrix {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// self · other.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm_nn(
            self.rows, self.cols, other.cols,
            &self.data, &other.data, &mut out.data,
        );
        out
    }

    /// self · otherᵀ. Larger operands go through an explicit transpose and
    /// the streaming nn kernel, which is markedly faster than row-dot-row.
    pub fn matmul_nt(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "matmul_nt shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.rows);
        if self.cols >= 16 && other.rows >= 16 {
            let bt = other.transpose();
            gemm_nn(
                self.rows, self.cols, other.rows,
                &self.data, &bt.data, &mut out.data,
            );
        } else {
            gemm_nt(
                self.rows, self.cols, other.rows,
                &self.data, &other.data, &mut out.data,
            );
        }
        out
    }

    /// selfᵀ · other.
    pub fn matmul_tn(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "matmul_tn shape mismatch");
        let mut out = Matrix::zeros(self.cols, other.cols);
        gemm_tn(
            self.rows, self.cols, other.cols,
            &self.data, &other.data, &mut out.data,
        );
        out
    }

    /// self · x for a vector x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matvec shape mismatch");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            out[i] = dot(self.row(i), x);
        }
        out
    }

    /// selfᵀ · x for a vector x.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len(), "matvec_t shape mismatch");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += xi * a;
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Matrix {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= c;
        }
        out
    }

    /// self + c·other.
    pub fn add_scaled(&self, other: &Matrix, c: f64) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (o, &b) in out.data.iter_mut().zip(&other.data) {
            *o += c * b;
        }
        out
    }

    pub fn trace(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "trace of non-square matrix");
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    /// (self + selfᵀ)/2, for cleaning up symmetric results.
    pub fn symmetrized(&self) -> Matrix {
        assert_eq!(self.rows, self.cols);
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        out
    }

    pub fn max_symmetry_defect(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Dot product with four independent accumulators. The summation order is
/// fixed by the code, so results are bit-reproducible; the split chains let
/// the FPU pipeline instead of serializing on one add.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let chunks = a.len() / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..chunks {
        let i = 4 * c;
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (s0 + s1) + (s2 + s3) + tail
}

/// out += a·b with a: n×k, b: k×m (all row-major). ikj order with the k
/// loop blocked by four keeps the inner loop streaming over contiguous rows
/// of b and out while quartering the out-row traffic.
pub fn gemm_nn(n: usize, k: usize, m: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), k * m);
    debug_assert_eq!(out.len(), n * m);
    let kb = k / 4 * 4;
    for i in 0..n {
        let a_row = &a[i * k..(i + 1) * k];
        let out_row = &mut out[i * m..(i + 1) * m];
        let mut kk = 0;
        while kk < kb {
            let (a0, a1, a2, a3) = (a_row[kk], a_row[kk + 1], a_row[kk + 2], a_row[kk + 3]);
            let b0 = &b[kk * m..(kk + 1) * m];
            let b1 = &b[(kk + 1) * m..(kk + 2) * m];
            let b2 = &b[(kk + 2) * m..(kk + 3) * m];
            let b3 = &b[(kk + 3) * m..(kk + 4) * m];
            for j in 0..m {
                out_row[j] += (a0 * b0[j] + a1 * b1[j]) + (a2 * b2[j] + a3 * b3[j]);
            }
            kk += 4;
        }
        while kk < k {
            let aik = a_row[kk];
            if aik != 0.0 {
                let b_row = &b[kk * m..(kk + 1) * m];
                for (o, &bv) in out_row.iter_mut().zip(b_row) {
                    *o += aik * bv;
                }
            }
            kk += 1;
        }
    }
}

/// out += a·bᵀ with a: n×k, b: m×k. Eight rows of b per pass: one load of
/// the a row feeds eight independent dot chains.
pub fn gemm_nt(n: usize, k: usize, m: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), m * k);
    debug_assert_eq!(out.len(), n * m);
    let mb = m / 8 * 8;
    for i in 0..n {
        let a_row = &a[i * k..(i + 1) * k];
        let out_row = &mut out[i * m..(i + 1) * m];
        let mut j = 0;
        while j < mb {
            let mut s = [0.0f64; 8];
            let rows: [&[f64]; 8] = [
                &b[j * k..(j + 1) * k],
                &b[(j + 1) * k..(j + 2) * k],
                &b[(j + 2) * k..(j + 3) * k],
                &b[(j + 3) * k..(j + 4) * k],
                &b[(j + 4) * k..(j + 5) * k],
                &b[(j + 5) * k..(j + 6) * k],
                &b[(j + 6) * k..(j + 7) * k],
                &b[(j + 7) * k..(j + 8) * k],
            ];
            for (kk, &av) in a_row.iter().enumerate() {
                s[0] += av * rows[0][kk];
                s[1] += av * rows[1][kk];
                s[2] += av * rows[2][kk];
                s[3] += av * rows[3][kk];
                s[4] += av * rows[4][kk];
                s[5] += av * rows[5][kk];
                s[6] += av * rows[6][kk];
                s[7] += av * rows[7][kk];
            }
            for (t, &sv) in s.iter().enumerate() {
                out_row[j + t] += sv;
            }
            j += 8;
        }
        while j < m {
            out_row[j] += dot(a_row, &b[j * k..(j + 1) * k]);
            j += 1;
        }
    }
}

/// out += aᵀ·b with a: n×k, b: n×m. Rank-4 accumulation over row blocks.
pub fn gemm_tn(n: usize, k: usize, m: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), n * m);
    debug_assert_eq!(out.len(), k * m);
    let nb = n / 4 * 4;
    let mut r = 0;
    while r < nb {
        let a0 = &a[r * k..(r + 1) * k];
        let a1 = &a[(r + 1) * k..(r + 2) * k];
        let a2 = &a[(r + 2) * k..(r + 3) * k];
        let a3 = &a[(r + 3) * k..(r + 4) * k];
        let b0 = &b[r * m..(r + 1) * m];
        let b1 = &b[(r + 1) * m..(r + 2) * m];
        let b2 = &b[(r + 2) * m..(r + 3) * m];
        let b3 = &b[(r + 3) * m..(r + 4) * m];
        for i in 0..k {
            let (v0, v1, v2, v3) = (a0[i], a1[i], a2[i], a3[i]);
            if v0 == 0.0 && v1 == 0.0 && v2 == 0.0 && v3 == 0.0 {
                continue;
            }
            let out_row = &mut out[i * m..(i + 1) * m];
            for j in 0..m {
                out_row[j] += (v0 * b0[j] + v1 * b1[j]) + (v2 * b2[j] + v3 * b3[j]);
            }
        }
        r += 4;
    }
    while r < n {
        let a_row = &a[r * k..(r + 1) * k];
        let b_row = &b[r * m..(r + 1) * m];
        for (i, &ari) in a_row.iter().enumerate() {
            if ari == 0.0 {
                continue;
            }
            let out_row = &mut out[i * m..(i + 1) * m];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += ari * bv;
            }
        }
        r += 1;
    }
}
