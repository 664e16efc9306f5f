//! Synthetic teacher datasets: isotropic Gaussian inputs with linear,
//! single-ReLU, or 10-unit multi-ReLU targets, plus label-noise injection
//! and a Gaussian-mixture classification task for the pruning benchmark.
//!
//! Teacher parameters are a pure function of the teacher seed, so train and
//! test splits sampled from the same [`TeacherSpec`] share an identical
//! teacher — required for a meaningful generalization gap.

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::rng::{derive_seed, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TeacherKind {
    /// y = wᵀx with w ~ N(0, I).
    LinearGaussian,
    /// y = ReLU(aᵀx) with a ~ N(0, I).
    SingleReLU,
    /// y = Σ_{k=1}^{10} ReLU(a_kᵀx + b_k), a_k and b_k standard normal.
    MultiReLU10,
}

impl TeacherKind {
    pub fn label(&self) -> &'static str {
        match self {
            TeacherKind::LinearGaussian => "linear",
            TeacherKind::SingleReLU => "relu",
            TeacherKind::MultiReLU10 => "multi_relu10",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeacherSpec {
    pub kind: TeacherKind,
    pub input_dim: usize,
    pub seed: u64,
}

const MULTI_RELU_UNITS: usize = 10;
const PURPOSE_TEACHER: u64 = 0x7465_6163;
const PURPOSE_INPUTS: u64 = 0x696e_7074;
const PURPOSE_NOISE: u64 = 0x6e6f_6973;

/// Concrete teacher parameters drawn once from the spec seed.
#[derive(Debug, Clone)]
pub struct Teacher {
    spec: TeacherSpec,
    /// Unit weight vectors, one row per ReLU unit (or the single linear w).
    weights: Matrix,
    biases: Vec<f64>,
}

impl Teacher {
    pub fn from_spec(spec: &TeacherSpec) -> Teacher {
        assert!(spec.input_dim >= 1);
        let mut rng = StreamRng::new(derive_seed(spec.seed, &[PURPOSE_TEACHER]));
        let units = match spec.kind {
            TeacherKind::LinearGaussian | TeacherKind::SingleReLU => 1,
            TeacherKind::MultiReLU10 => MULTI_RELU_UNITS,
        };
        let weights = Matrix::from_fn(units, spec.input_dim, |_, _| rng.normal());
        let biases = match spec.kind {
            TeacherKind::MultiReLU10 => (0..units).map(|_| rng.normal()).collect(),
            _ => vec![0.0; units],
        };
        Teacher {
            spec: *spec,
            weights,
            biases,
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self.spec.kind {
            TeacherKind::LinearGaussian => crate::linalg::matrix::dot(self.weights.row(0), x),
            TeacherKind::SingleReLU => {
                crate::linalg::matrix::dot(self.weights.row(0), x).max(0.0)
            }
            TeacherKind::MultiReLU10 => (0..MULTI_RELU_UNITS)
                .map(|k| {
                    (crate::linalg::matrix::dot(self.weights.row(k), x) + self.biases[k]).max(0.0)
                })
                .sum(),
        }
    }
}

/// A sampled regression dataset. `noise_sigma` records the std of any
/// injected label noise (0 for clean data).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub xs: Matrix,
    pub ys: Matrix,
    pub teacher: TeacherSpec,
    pub noise_sigma: f64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.xs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.rows() == 0
    }
}

/// Sample n inputs x ~ N(0, I_d) and teacher targets. `stream` separates
/// independent splits (train/test/...) drawn from the same teacher.
pub fn sample_dataset(spec: &TeacherSpec, n: usize, stream: u64) -> Dataset {
    assert!(n >= 1);
    let teacher = Teacher::from_spec(spec);
    let mut rng = StreamRng::new(derive_seed(spec.seed, &[PURPOSE_INPUTS, stream]));
    let xs = Matrix::from_fn(n, spec.input_dim, |_, _| rng.normal());
    let mut ys = Matrix::zeros(n, 1);
    for i in 0..n {
        ys.set(i, 0, teacher.evaluate(xs.row(i)));
    }
    Dataset {
        xs,
        ys,
        teacher: *spec,
        noise_sigma: 0.0,
    }
}

/// Fresh additive Gaussian label noise with std `sigma`, independent per
/// `run_seed`. The input dataset is left untouched.
pub fn add_label_noise(ds: &Dataset, sigma: f64, run_seed: u64) -> Dataset {
    assert!(sigma >= 0.0);
    let mut noisy = ds.clone();
    noisy.noise_sigma = sigma;
    if sigma == 0.0 {
        return noisy;
    }
    let mut rng = StreamRng::new(derive_seed(run_seed, &[PURPOSE_NOISE]));
    for v in noisy.ys.as_mut_slice().iter_mut() {
        *v += sigma * rng.normal();
    }
    noisy
}

/// Gaussian-mixture classification data for the pruning benchmark:
/// `classes` spherical clusters with unit-normal means scaled by
/// `mean_scale`, one-hot targets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationDataset {
    pub xs: Matrix,
    /// One-hot targets, n×K.
    pub ys: Matrix,
    pub labels: Vec<usize>,
}

pub fn sample_gaussian_mixture(
    classes: usize,
    input_dim: usize,
    n: usize,
    mean_scale: f64,
    seed: u64,
    stream: u64,
) -> ClassificationDataset {
    assert!(classes >= 2 && input_dim >= 1 && n >= 1);
    let mut mean_rng = StreamRng::new(derive_seed(seed, &[PURPOSE_TEACHER]));
    let means = Matrix::from_fn(classes, input_dim, |_, _| mean_scale * mean_rng.normal());
    let mut rng = StreamRng::new(derive_seed(seed, &[PURPOSE_INPUTS, stream]));
    let mut xs = Matrix::zeros(n, input_dim);
    let mut ys = Matrix::zeros(n, classes);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = rng.below(classes);
        labels.push(class);
        ys.set(i, class, 1.0);
        for j in 0..input_dim {
            xs.set(i, j, means.get(class, j) + rng.normal());
        }
    }
    ClassificationDataset { xs, ys, labels }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_teacher_maps_zero_to_zero() {
        let spec = TeacherSpec {
            kind: TeacherKind::LinearGaussian,
            input_dim: 5,
            seed: 1,
        };
        let teacher = Teacher::from_spec(&spec);
        assert_eq!(teacher.evaluate(&[0.0; 5]), 0.0);
    }

    #[test]
    fn multi_relu_with_zero_weights_is_constant() {
        // All a_k = 0, b_k = 1 gives y = 10 for every input.
        let spec = TeacherSpec {
            kind: TeacherKind::MultiReLU10,
            input_dim: 3,
            seed: 2,
        };
        let mut teacher = Teacher::from_spec(&spec);
        teacher.weights = Matrix::zeros(10, 3);
        teacher.biases = vec![1.0; 10];
        assert_eq!(teacher.evaluate(&[4.0, -1.0, 0.3]), 10.0);
    }

    #[test]
    fn train_and_test_share_the_teacher() {
        let spec = TeacherSpec {
            kind: TeacherKind::SingleReLU,
            input_dim: 4,
            seed: 3,
        };
        let train = sample_dataset(&spec, 16, 0);
        let test = sample_dataset(&spec, 16, 1);
        // Different inputs, but the same mapping: evaluating the teacher on
        // test inputs must reproduce test targets.
        assert_ne!(train.xs, test.xs);
        let teacher = Teacher::from_spec(&spec);
        for i in 0..16 {
            assert_eq!(test.ys.get(i, 0), teacher.evaluate(test.xs.row(i)));
        }
    }

    #[test]
    fn linear_teacher_variance_is_input_dim() {
        // Var(wᵀx) over both w and x equals d; average over many teachers.
        let d = 20;
        let mut sum = 0.0;
        let mut count = 0usize;
        for teacher_seed in 0..500u64 {
            let spec = TeacherSpec {
                kind: TeacherKind::LinearGaussian,
                input_dim: d,
                seed: teacher_seed,
            };
            let ds = sample_dataset(&spec, 200, 0);
            for i in 0..200 {
                sum += ds.ys.get(i, 0) * ds.ys.get(i, 0);
                count += 1;
            }
        }
        let var = sum / count as f64;
        assert!(
            (var - d as f64).abs() < 0.05 * d as f64,
            "Var(y) = {var}, expected ~{d}"
        );
    }

    #[test]
    fn zero_sigma_noise_is_identity() {
        let spec = TeacherSpec {
            kind: TeacherKind::LinearGaussian,
            input_dim: 3,
            seed: 4,
        };
        let ds = sample_dataset(&spec, 10, 0);
        let noisy = add_label_noise(&ds, 0.0, 77);
        assert_eq!(ds.ys, noisy.ys);
    }

    #[test]
    fn injected_noise_has_the_right_variance() {
        let spec = TeacherSpec {
            kind: TeacherKind::LinearGaussian,
            input_dim: 2,
            seed: 5,
        };
        let ds = sample_dataset(&spec, 100_000, 0);
        let sigma = 0.3;
        let noisy = add_label_noise(&ds, sigma, 11);
        let mut sumsq = 0.0;
        for i in 0..ds.len() {
            let e = noisy.ys.get(i, 0) - ds.ys.get(i, 0);
            sumsq += e * e;
        }
        let var = sumsq / ds.len() as f64;
        assert!(
            (var - sigma * sigma).abs() < 0.03 * sigma * sigma,
            "noise var {var}"
        );
    }

    #[test]
    fn different_run_seeds_give_independent_noise() {
        let spec = TeacherSpec {
            kind: TeacherKind::LinearGaussian,
            input_dim: 2,
            seed: 6,
        };
        let ds = sample_dataset(&spec, 1000, 0);
        let a = add_label_noise(&ds, 0.1, 1);
        let b = add_label_noise(&ds, 0.1, 2);
        assert_ne!(a.ys, b.ys);
        // Same marginal variance for both realizations.
        let var = |noisy: &Dataset| {
            (0..1000)
                .map(|i| {
                    let e = noisy.ys.get(i, 0) - ds.ys.get(i, 0);
                    e * e
                })
                .sum::<f64>()
                / 1000.0
        };
        assert!((var(&a) / var(&b) - 1.0).abs() < 0.2);
    }

    #[test]
    fn inputs_are_whitened() {
        // (1/n)XᵀX approaches I_d; max |off-diagonal| < 0.05 at n = 1e5.
        let spec = TeacherSpec {
            kind: TeacherKind::LinearGaussian,
            input_dim: 10,
            seed: 7,
        };
        let ds = sample_dataset(&spec, 100_000, 0);
        let gram = ds.xs.matmul_tn(&ds.xs).scale(1.0 / ds.len() as f64);
        for i in 0..10 {
            assert!((gram.get(i, i) - 1.0).abs() < 0.05);
            for j in 0..10 {
                if i != j {
                    assert!(gram.get(i, j).abs() < 0.05);
                }
            }
        }
    }

    #[test]
    fn dataset_json_round_trip() {
        let spec = TeacherSpec {
            kind: TeacherKind::SingleReLU,
            input_dim: 3,
            seed: 8,
        };
        let ds = sample_dataset(&spec, 5, 0);
        let json = serde_json::to_string(&ds).unwrap();
        let back: Dataset = serde_json::from_str(&json).unwrap();
        assert_eq!(ds.xs, back.xs);
        assert_eq!(ds.ys, back.ys);
        assert_eq!(ds.noise_sigma, back.noise_sigma);
    }

    #[test]
    fn gaussian_mixture_has_one_hot_targets() {
        let ds = sample_gaussian_mixture(4, 6, 200, 2.0, 9, 0);
        for i in 0..200 {
            let row_sum: f64 = (0..4).map(|k| ds.ys.get(i, k)).sum();
            assert_eq!(row_sum, 1.0);
            assert_eq!(ds.ys.get(i, ds.labels[i]), 1.0);
        }
    }
}
