//! Conjugate gradient with operator-only access, for the dual formulation
//! (J Jᵀ + λI) α = ε. Non-convergence is an expected outcome on badly
//! conditioned systems and is reported, never raised.

use super::matrix::{dot, Matrix};

/// Symmetric PSD operator exposed through matrix-vector products only.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

/// Wrap a closure as an operator.
pub struct FnOperator<F: Fn(&[f64], &mut [f64])> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

impl LinearOperator for Matrix {
    fn dim(&self) -> usize {
        debug_assert_eq!(self.rows(), self.cols());
        self.rows()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.matvec(x));
    }
}

/// Outcome of a CG solve.
#[derive(Debug, Clone)]
pub struct CgSolution {
    pub alpha: Vec<f64>,
    pub converged: bool,
    /// ‖(op + λI)α − rhs‖ / ‖rhs‖ at exit.
    pub relative_residual: f64,
    pub iterations: usize,
}

/// Solve (op + λ I) α = rhs by conjugate gradient.
///
/// `converged` is true iff the relative residual dropped below `cg_tol`
/// within `max_iter` iterations; otherwise the best iterate and its final
/// residual are returned so the caller can decide what to do.
pub fn ridge_dual_solve(
    op: &dyn LinearOperator,
    lambda: f64,
    rhs: &[f64],
    cg_tol: f64,
    max_iter: usize,
) -> CgSolution {
    let n = op.dim();
    assert_eq!(rhs.len(), n, "ridge_dual_solve rhs dimension");
    assert!(lambda >= 0.0, "ridge_dual_solve needs lambda >= 0");

    let rhs_norm = dot(rhs, rhs).sqrt();
    if rhs_norm == 0.0 {
        return CgSolution {
            alpha: vec![0.0; n],
            converged: true,
            relative_residual: 0.0,
            iterations: 0,
        };
    }

    let mut alpha = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);

    for iter in 1..=max_iter {
        op.apply(&p, &mut ap);
        for (a, &pi) in ap.iter_mut().zip(&p) {
            *a += lambda * pi;
        }
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            // Operator is not PD along p; report where we stopped.
            return CgSolution {
                alpha,
                converged: false,
                relative_residual: rr.sqrt() / rhs_norm,
                iterations: iter - 1,
            };
        }
        let step = rr / pap;
        for ((x, &pi), (ri, &api)) in alpha
            .iter_mut()
            .zip(&p)
            .zip(r.iter_mut().zip(&ap))
        {
            *x += step * pi;
            *ri -= step * api;
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= cg_tol * rhs_norm {
            return CgSolution {
                alpha,
                converged: true,
                relative_residual: rr_new.sqrt() / rhs_norm,
                iterations: iter,
            };
        }
        let beta = rr_new / rr;
        for (pi, &ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }

    CgSolution {
        alpha,
        converged: false,
        relative_residual: rr.sqrt() / rhs_norm,
        iterations: max_iter,
    }
}
