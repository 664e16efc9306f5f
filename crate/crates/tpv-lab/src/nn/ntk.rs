//! Jacobian Gram matrices (empirical NTK) computed layerwise, without
//! materializing any n×p Jacobian.
//!
//! For a scalar-output MLP the inner product of two Jacobian rows splits
//! per layer into (δ_l(x)·δ_l(x'))·(a_{l-1}(x)·a_{l-1}(x') + 1), with the
//! +1 accounting for the bias column. This is what makes the wide-network
//! spectrum computations feasible: the Gram is n×n however large p gets.

use crate::linalg::matrix::Matrix;

use super::{ForwardCache, Network, NnError};

/// Per-layer sensitivities δ_l = ∂f/∂z_l for a scalar-output network,
/// computed from a forward cache. Output layer last.
pub fn scalar_sensitivities(net: &Network, cache: &ForwardCache) -> Vec<Matrix> {
    assert_eq!(
        net.config.output_dim, 1,
        "scalar_sensitivities needs output_dim = 1"
    );
    let n = cache.activations[0].rows();
    let mut ones = Matrix::zeros(n, 1);
    for i in 0..n {
        ones.set(i, 0, 1.0);
    }
    net.backward_deltas(cache, &ones)
}

/// Forward + sensitivity caches for one input batch.
pub struct NtkSide {
    pub activations: Vec<Matrix>,
    pub deltas: Vec<Matrix>,
}

impl NtkSide {
    pub fn build(net: &Network, xs: &Matrix) -> Result<NtkSide, NnError> {
        let cache = net.forward_cached(xs)?;
        let deltas = scalar_sensitivities(net, &cache);
        Ok(NtkSide {
            activations: cache.activations,
            deltas,
        })
    }
}

/// J(a)·J(b)ᵀ for a scalar-output network: the (i, j) entry is the inner
/// product of the Jacobian rows of sample i in `a` and sample j in `b`.
pub fn ntk_gram(net: &Network, a: &NtkSide, b: &NtkSide) -> Matrix {
    let depth = net.config.depth();
    let n_a = a.activations[0].rows();
    let n_b = b.activations[0].rows();
    let mut gram = Matrix::zeros(n_a, n_b);
    for l in 0..depth {
        let d = a.deltas[l].matmul_nt(&b.deltas[l]);
        let act = a.activations[l].matmul_nt(&b.activations[l]);
        for ((g, &dv), &av) in gram
            .as_mut_slice()
            .iter_mut()
            .zip(d.as_slice())
            .zip(act.as_slice())
        {
            *g += dv * (av + 1.0);
        }
    }
    gram
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_network, MlpConfig};
    use crate::rng::StreamRng;

    #[test]
    fn gram_matches_explicit_jacobian_product() {
        let cfg = MlpConfig::new(4, vec![7, 5], 1, 321);
        let mut net = init_network(&cfg);
        let mut rng = StreamRng::new(322);
        for b in net.params.0.iter_mut() {
            *b += 0.05 * rng.normal();
        }
        let xs_a = Matrix::from_fn(6, 4, |_, _| rng.normal());
        let xs_b = Matrix::from_fn(9, 4, |_, _| rng.normal());

        let side_a = NtkSide::build(&net, &xs_a).unwrap();
        let side_b = NtkSide::build(&net, &xs_b).unwrap();
        let gram = ntk_gram(&net, &side_a, &side_b);

        let ja = net.output_jacobian(&xs_a).unwrap();
        let jb = net.output_jacobian(&xs_b).unwrap();
        let explicit = ja.matmul_nt(&jb);

        let scale = explicit.max_abs().max(1e-300);
        assert!(
            gram.add_scaled(&explicit, -1.0).max_abs() < 1e-8 * scale,
            "gram mismatch"
        );
    }

    #[test]
    fn linear_model_gram_is_xxt_plus_one() {
        let cfg = MlpConfig::new(3, vec![], 1, 31);
        let net = init_network(&cfg);
        let mut rng = StreamRng::new(32);
        let xs = Matrix::from_fn(5, 3, |_, _| rng.normal());
        let side = NtkSide::build(&net, &xs).unwrap();
        let gram = ntk_gram(&net, &side, &side);
        let expect = xs.matmul_nt(&xs);
        for i in 0..5 {
            for j in 0..5 {
                assert!((gram.get(i, j) - expect.get(i, j) - 1.0).abs() < 1e-12);
            }
        }
    }
}
