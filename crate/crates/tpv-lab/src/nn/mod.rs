//! From-scratch fully connected ReLU networks with exact backpropagation
//! for loss gradients and per-sample output-parameter Jacobian rows.
//!
//! Parameters live in one flat vector (weights then biases, layer by layer,
//! row-major within each weight matrix), which is the common coordinate
//! system for Jacobians, covariances, and perturbations. Networks are
//! immutable value objects; forward and Jacobian calls are pure.

pub mod ntk;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::matrix::{gemm_nn, gemm_tn, Matrix};
use crate::rng::StreamRng;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("empty dataset")]
    EmptyDataset,
}

/// Hidden activation. Only ReLU is supported; the output layer is linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    ReLU,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl MlpConfig {
    pub fn new(input_dim: usize, hidden_widths: Vec<usize>, output_dim: usize, seed: u64) -> Self {
        assert!(input_dim >= 1 && output_dim >= 1);
        assert!(hidden_widths.iter().all(|&w| w >= 1));
        MlpConfig {
            input_dim,
            hidden_widths,
            output_dim,
            activation: Activation::ReLU,
            seed,
        }
    }

    /// Layer dimensions as (in, out) pairs, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_widths.len() + 1);
        let mut prev = self.input_dim;
        for &w in &self.hidden_widths {
            dims.push((prev, w));
            prev = w;
        }
        dims.push((prev, self.output_dim));
        dims
    }

    /// Total parameter count p = Σ (out·in + out).
    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| o * i + o).sum()
    }

    pub fn depth(&self) -> usize {
        self.hidden_widths.len() + 1
    }
}

/// Flat parameter vector of length p.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(p: usize) -> Self {
        ParamVector(vec![0.0; p])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// self += c · other.
    pub fn axpy(&mut self, c: f64, other: &ParamVector) {
        debug_assert_eq!(self.len(), other.len());
        for (a, &b) in self.0.iter_mut().zip(&other.0) {
            *a += c * b;
        }
    }

    pub fn sub(&self, other: &ParamVector) -> ParamVector {
        debug_assert_eq!(self.len(), other.len());
        ParamVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Offsets of one layer's weight block and bias block in the flat vector.
#[derive(Debug, Clone, Copy)]
pub struct LayerSpan {
    pub inp: usize,
    pub out: usize,
    pub w_off: usize,
    pub b_off: usize,
}

pub fn layer_spans(cfg: &MlpConfig) -> Vec<LayerSpan> {
    let mut spans = Vec::new();
    let mut off = 0;
    for (inp, out) in cfg.layer_dims() {
        let w_off = off;
        let b_off = off + out * inp;
        off = b_off + out;
        spans.push(LayerSpan { inp, out, w_off, b_off });
    }
    spans
}

/// A configuration plus its flat parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    pub config: MlpConfig,
    pub params: ParamVector,
}

/// He-uniform initialization: weights uniform in ±√(6/fan_in), biases zero.
/// Deterministic in `cfg.seed`.
pub fn init_network(cfg: &MlpConfig) -> Network {
    let mut rng = StreamRng::new(crate::rng::derive_seed(cfg.seed, &[PURPOSE_INIT]));
    let mut params = vec![0.0; cfg.param_count()];
    for span in layer_spans(cfg) {
        let bound = (6.0 / span.inp as f64).sqrt();
        for w in params[span.w_off..span.w_off + span.out * span.inp].iter_mut() {
            *w = rng.uniform_in(-bound, bound);
        }
        // biases stay zero
    }
    Network {
        config: cfg.clone(),
        params: ParamVector(params),
    }
}

const PURPOSE_INIT: u64 = 0x6e65_7469;

impl Network {
    pub fn with_params(&self, params: ParamVector) -> Network {
        assert_eq!(params.len(), self.config.param_count());
        Network {
            config: self.config.clone(),
            params,
        }
    }

    pub fn param_count(&self) -> usize {
        self.config.param_count()
    }

    /// Weight matrix of layer `l` as an out×in dense copy.
    pub fn layer_weight(&self, l: usize) -> Matrix {
        let span = layer_spans(&self.config)[l];
        Matrix::from_vec(
            span.out,
            span.inp,
            self.params.0[span.w_off..span.w_off + span.out * span.inp].to_vec(),
        )
        .expect("layer span consistent")
    }

    pub fn layer_bias(&self, l: usize) -> Vec<f64> {
        let span = layer_spans(&self.config)[l];
        self.params.0[span.b_off..span.b_off + span.out].to_vec()
    }

    /// Single-input forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        if x.len() != self.config.input_dim {
            return Err(NnError::DimMismatch {
                context: "forward input",
                expected: self.config.input_dim,
                got: x.len(),
            });
        }
        let spans = layer_spans(&self.config);
        let last = spans.len() - 1;
        let mut act = x.to_vec();
        for (l, span) in spans.iter().enumerate() {
            let mut next = vec![0.0; span.out];
            for (j, nj) in next.iter_mut().enumerate() {
                let row = &self.params.0[span.w_off + j * span.inp..span.w_off + (j + 1) * span.inp];
                let mut z = self.params.0[span.b_off + j];
                for (&w, &a) in row.iter().zip(&act) {
                    z += w * a;
                }
                *nj = if l < last { relu(z) } else { z };
            }
            act = next;
        }
        Ok(act)
    }

    /// Batched forward over the rows of `xs`, returning an n×K matrix.
    pub fn batch_forward(&self, xs: &Matrix) -> Result<Matrix, NnError> {
        Ok(self.forward_cached(xs)?.output().clone())
    }

    /// Forward pass retaining per-layer activations for backward passes.
    pub fn forward_cached(&self, xs: &Matrix) -> Result<ForwardCache, NnError> {
        if xs.cols() != self.config.input_dim {
            return Err(NnError::DimMismatch {
                context: "batch forward input",
                expected: self.config.input_dim,
                got: xs.cols(),
            });
        }
        let spans = layer_spans(&self.config);
        let last = spans.len() - 1;
        let n = xs.rows();
        let mut activations: Vec<Matrix> = Vec::with_capacity(spans.len() + 1);
        activations.push(xs.clone());
        for (l, span) in spans.iter().enumerate() {
            let prev = &activations[l];
            let mut z = Matrix::zeros(n, span.out);
            // Weights are stored out×in; transpose once so the batched
            // product streams through the nn kernel.
            let w = &self.params.0[span.w_off..span.w_off + span.out * span.inp];
            let mut w_t = vec![0.0; span.inp * span.out];
            for j in 0..span.out {
                for i in 0..span.inp {
                    w_t[i * span.out + j] = w[j * span.inp + i];
                }
            }
            gemm_nn(
                n,
                span.inp,
                span.out,
                prev.as_slice(),
                &w_t,
                z.as_mut_slice(),
            );
            let bias = &self.params.0[span.b_off..span.b_off + span.out];
            for i in 0..n {
                let row = z.row_mut(i);
                for (v, &b) in row.iter_mut().zip(bias) {
                    *v += b;
                    if l < last {
                        *v = relu(*v);
                    }
                }
            }
            activations.push(z);
        }
        Ok(ForwardCache { activations })
    }

    /// Per-sample output-parameter Jacobian, shape (n·K)×p. Row i·K+k holds
    /// ∇_w f(x_i)_k; the ReLU subgradient at exactly zero is taken as zero.
    pub fn output_jacobian(&self, xs: &Matrix) -> Result<Matrix, NnError> {
        let cache = self.forward_cached(xs)?;
        let n = xs.rows();
        let k_out = self.config.output_dim;
        let p = self.param_count();
        let spans = layer_spans(&self.config);
        let mut jac = Matrix::zeros(n * k_out, p);
        for k in 0..k_out {
            // Upstream: one-hot on output coordinate k for every sample.
            let mut upstream = Matrix::zeros(n, k_out);
            for i in 0..n {
                upstream.set(i, k, 1.0);
            }
            let deltas = self.backward_deltas(&cache, &upstream);
            for (l, span) in spans.iter().enumerate() {
                let delta = &deltas[l];
                let act = &cache.activations[l];
                for i in 0..n {
                    let row = jac.row_mut(i * k_out + k);
                    let drow = delta.row(i);
                    let arow = act.row(i);
                    for (j, &dj) in drow.iter().enumerate() {
                        if dj != 0.0 {
                            let dst =
                                &mut row[span.w_off + j * span.inp..span.w_off + (j + 1) * span.inp];
                            for (w, &a) in dst.iter_mut().zip(arow) {
                                *w = dj * a;
                            }
                        }
                        row[span.b_off + j] = dj;
                    }
                }
            }
        }
        Ok(jac)
    }

    /// Per-sample vector-Jacobian products: row i of the result is
    /// upstream_iᵀ · J(x_i), an n×p matrix of per-sample gradients.
    pub fn vjp_batch(&self, cache: &ForwardCache, upstream: &Matrix) -> Matrix {
        let n = cache.activations[0].rows();
        let p = self.param_count();
        let spans = layer_spans(&self.config);
        assert_eq!(upstream.rows(), n);
        assert_eq!(upstream.cols(), self.config.output_dim);
        let deltas = self.backward_deltas(cache, upstream);
        let mut out = Matrix::zeros(n, p);
        for (l, span) in spans.iter().enumerate() {
            let delta = &deltas[l];
            let act = &cache.activations[l];
            for i in 0..n {
                let row = out.row_mut(i);
                let drow = delta.row(i);
                let arow = act.row(i);
                for (j, &dj) in drow.iter().enumerate() {
                    if dj != 0.0 {
                        let dst =
                            &mut row[span.w_off + j * span.inp..span.w_off + (j + 1) * span.inp];
                        for (w, &a) in dst.iter_mut().zip(arow) {
                            *w = dj * a;
                        }
                    }
                    row[span.b_off + j] = dj;
                }
            }
        }
        out
    }

    /// Propagate an n×K upstream through the network, returning per-layer
    /// delta matrices (n×out_l), output layer last in index order.
    pub(crate) fn backward_deltas(&self, cache: &ForwardCache, upstream: &Matrix) -> Vec<Matrix> {
        let spans = layer_spans(&self.config);
        let depth = spans.len();
        let n = upstream.rows();
        let mut deltas = vec![Matrix::zeros(0, 0); depth];
        deltas[depth - 1] = upstream.clone();
        for l in (1..depth).rev() {
            let span = spans[l];
            // delta_{l-1} = (delta_l · W_l) ⊙ relu'(z_{l-1})
            let mut prev = Matrix::zeros(n, span.inp);
            crate::linalg::matrix::gemm_nn(
                n,
                span.out,
                span.inp,
                deltas[l].as_slice(),
                &self.params.0[span.w_off..span.w_off + span.out * span.inp],
                prev.as_mut_slice(),
            );
            let post = &cache.activations[l]; // relu output of layer l-1
            for (v, &a) in prev.as_mut_slice().iter_mut().zip(post.as_slice()) {
                if a <= 0.0 {
                    *v = 0.0;
                }
            }
            deltas[l - 1] = prev;
        }
        deltas
    }

    /// MSE loss (1/2n)Σ‖f(x_i) − y_i‖² and its exact parameter gradient.
    pub fn loss_and_grad_mse(
        &self,
        xs: &Matrix,
        ys: &Matrix,
    ) -> Result<(f64, ParamVector), NnError> {
        let n = xs.rows();
        if n == 0 {
            return Err(NnError::EmptyDataset);
        }
        if ys.rows() != n || ys.cols() != self.config.output_dim {
            return Err(NnError::DimMismatch {
                context: "loss targets",
                expected: n * self.config.output_dim,
                got: ys.rows() * ys.cols(),
            });
        }
        let cache = self.forward_cached(xs)?;
        let preds = cache.output();
        let mut residual = preds.clone();
        let mut loss = 0.0;
        for (r, &y) in residual.as_mut_slice().iter_mut().zip(ys.as_slice()) {
            *r -= y;
            loss += *r * *r;
        }
        loss /= 2.0 * n as f64;
        let upstream = residual.scale(1.0 / n as f64);
        let grad = self.backward_param_grad(&cache, &upstream);
        Ok((loss, grad))
    }

    /// MSE loss only.
    pub fn loss_mse(&self, xs: &Matrix, ys: &Matrix) -> Result<f64, NnError> {
        let n = xs.rows();
        if n == 0 {
            return Err(NnError::EmptyDataset);
        }
        let preds = self.batch_forward(xs)?;
        let mut loss = 0.0;
        for (&p, &y) in preds.as_slice().iter().zip(ys.as_slice()) {
            let r = p - y;
            loss += r * r;
        }
        Ok(loss / (2.0 * n as f64))
    }

    /// Accumulated parameter gradient for a given n×K upstream (summed over
    /// samples): grad_{W_l} = δ_lᵀ·A_{l-1}, grad_{b_l} = Σ_i δ_l(i).
    pub fn backward_param_grad(&self, cache: &ForwardCache, upstream: &Matrix) -> ParamVector {
        let spans = layer_spans(&self.config);
        let deltas = self.backward_deltas(cache, upstream);
        let mut grad = vec![0.0; self.param_count()];
        let n = upstream.rows();
        for (l, span) in spans.iter().enumerate() {
            let delta = &deltas[l];
            let act = &cache.activations[l];
            gemm_tn(
                n,
                span.out,
                span.inp,
                delta.as_slice(),
                act.as_slice(),
                &mut grad[span.w_off..span.w_off + span.out * span.inp],
            );
            for i in 0..n {
                for (g, &d) in grad[span.b_off..span.b_off + span.out]
                    .iter_mut()
                    .zip(delta.row(i))
                {
                    *g += d;
                }
            }
        }
        ParamVector(grad)
    }
}

/// Activations retained by [`Network::forward_cached`]; index 0 is the
/// input batch, the last entry the network output.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("cache has layers")
    }
}

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}
