//! Configuration for the experiment commands. Every field has a desk-scale
//! default so an empty JSON object is a valid config; `--full` swaps in the
//! full-scale grids (hours of runtime, not CI material).

use serde::{Deserialize, Serialize};

use crate::datagen::TeacherKind;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub base_seed: u64,
    pub stability_grid: StabilityGridConfig,
    pub label_noise_curve: LabelCurveConfig,
    pub sgd_lyapunov: SgdLyapunovConfig,
    pub quant: QuantConfig,
    pub prune_bench: PruneBenchConfig,
    pub gradcheck: GradcheckConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            base_seed: 1,
            stability_grid: StabilityGridConfig::default(),
            label_noise_curve: LabelCurveConfig::default(),
            sgd_lyapunov: SgdLyapunovConfig::default(),
            quant: QuantConfig::default(),
            prune_bench: PruneBenchConfig::default(),
            gradcheck: GradcheckConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Full-scale settings approximating the original experiment grids.
    /// Expect multi-hour runtimes on a desktop.
    pub fn apply_full_scale(&mut self) {
        self.stability_grid.input_dims = vec![10, 20, 50];
        self.stability_grid.widths = vec![1, 256];
        self.stability_grid.depths = vec![2, 3, 4];
        self.stability_grid.label_sigmas = vec![0.005, 0.01];
        self.stability_grid.label_runs = 20;
        self.stability_grid.sgd_lrs = vec![1e-3, 5e-4];
        self.stability_grid.sgd_batches = vec![32, 128];
        self.label_noise_curve.widths = vec![128, 256, 512, 800, 1024, 1600];
        self.label_noise_curve.sigmas = vec![0.01, 0.05, 0.1, 0.2];
        self.label_noise_curve.runs = 50;
        self.label_noise_curve.retrain_epochs = 500;
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityGridConfig {
    pub teachers: Vec<TeacherKind>,
    pub input_dims: Vec<usize>,
    pub train_sizes: Vec<usize>,
    /// Hidden-layer widths.
    pub widths: Vec<usize>,
    /// Total layer counts (hidden layers = depth − 1).
    pub depths: Vec<usize>,
    pub test_size: usize,
    pub reference_lr: f64,
    pub reference_epochs: usize,
    pub label_sigmas: Vec<f64>,
    pub label_runs: usize,
    pub retrain_epochs: usize,
    /// Proximity strength for label-noise retraining (Appendix-D.4-style
    /// local regime). Zero disables the anchor; without it, cells whose
    /// reference cannot reach near-zero loss drift out of the first-order
    /// regime and every run is discarded.
    pub label_proximity_gamma: f64,
    pub sgd_lrs: Vec<f64>,
    pub sgd_batches: Vec<usize>,
    pub sgd_momentum: f64,
    pub sgd_burn_in: usize,
    pub sgd_snapshot_every: usize,
    pub sgd_total_steps: usize,
}

impl Default for StabilityGridConfig {
    fn default() -> Self {
        StabilityGridConfig {
            teachers: vec![
                TeacherKind::LinearGaussian,
                TeacherKind::SingleReLU,
                TeacherKind::MultiReLU10,
            ],
            input_dims: vec![10, 20],
            train_sizes: vec![1000, 10],
            widths: vec![1, 32],
            depths: vec![2, 3],
            test_size: 5000,
            reference_lr: 1e-2,
            reference_epochs: 4000,
            label_sigmas: vec![0.01],
            label_runs: 12,
            retrain_epochs: 200,
            label_proximity_gamma: 10.0,
            sgd_lrs: vec![1e-3],
            sgd_batches: vec![32],
            sgd_momentum: 0.9,
            sgd_burn_in: 200,
            sgd_snapshot_every: 20,
            sgd_total_steps: 1000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelCurveConfig {
    pub widths: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub input_dim: usize,
    pub n_train: usize,
    pub test_size: usize,
    pub runs: usize,
    pub reference_lr: f64,
    pub reference_epochs: usize,
    pub retrain_epochs: usize,
    /// Perturb the reference model's own predictions instead of the teacher
    /// labels. This makes w⋆ an exact minimum of the clean retraining
    /// problem, so retraining motion is purely noise-driven at any width
    /// and no proximity anchor is needed.
    pub noise_on_reference_logits: bool,
}

impl Default for LabelCurveConfig {
    fn default() -> Self {
        LabelCurveConfig {
            widths: vec![128, 256, 512],
            sigmas: vec![0.01],
            input_dim: 20,
            n_train: 1000,
            test_size: 5000,
            runs: 20,
            reference_lr: 1e-2,
            reference_epochs: 800,
            retrain_epochs: 400,
            noise_on_reference_logits: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdLyapunovConfig {
    pub input_dim: usize,
    pub n_train: usize,
    pub test_size: usize,
    /// Std of the planted label noise that leaves residuals at the optimum.
    pub noise_sigma: f64,
    /// η expressed as a fraction of 1/λ_max(H_eff).
    pub eta_fractions: Vec<f64>,
    pub batches: Vec<usize>,
    /// Snapshots collected per setting; burn-in and cadence are derived
    /// from the OU relaxation time 1/(η·λ_min) so slow modes equilibrate.
    pub snapshots: usize,
}

impl Default for SgdLyapunovConfig {
    fn default() -> Self {
        SgdLyapunovConfig {
            input_dim: 6,
            n_train: 64,
            test_size: 256,
            noise_sigma: 0.3,
            eta_fractions: vec![0.01, 0.005],
            batches: vec![4, 8],
            snapshots: 150,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantConfig {
    pub input_dim: usize,
    pub n_train: usize,
    pub test_size: usize,
    /// Hidden width of the MLP variant; the linear variant always runs.
    pub mlp_width: usize,
    pub mlp_train_epochs: usize,
    pub mlp_train_lr: f64,
    pub deltas: Vec<f64>,
    pub n_draws: usize,
}

impl Default for QuantConfig {
    fn default() -> Self {
        QuantConfig {
            input_dim: 10,
            n_train: 200,
            test_size: 1000,
            mlp_width: 16,
            mlp_train_epochs: 2000,
            mlp_train_lr: 1e-2,
            deltas: vec![1e-3, 5e-4],
            n_draws: 20_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PruneBenchConfig {
    pub classes: usize,
    pub input_dim: usize,
    pub width: usize,
    pub n_train: usize,
    pub n_eval: usize,
    pub mean_scale: f64,
    /// One-hot regression targets are scaled by this so a fitted model has
    /// real softmax margins (MSE to plain one-hots caps max prob near 0.48).
    pub target_scale: f64,
    pub train_lr: f64,
    pub train_epochs: usize,
    pub min_train_accuracy: f64,
    pub target_sparsity: f64,
    pub iterations: usize,
    pub seeds: usize,
    pub confidence_tau: f64,
}

impl Default for PruneBenchConfig {
    fn default() -> Self {
        PruneBenchConfig {
            classes: 4,
            input_dim: 10,
            width: 64,
            n_train: 2000,
            n_eval: 2000,
            mean_scale: 2.0,
            target_scale: 10.0,
            train_lr: 5e-3,
            train_epochs: 500,
            min_train_accuracy: 0.95,
            target_sparsity: 0.5,
            iterations: 18,
            seeds: 5,
            confidence_tau: crate::pruning::DEFAULT_CONFIDENCE_TAU,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub instances: usize,
    pub tolerance: f64,
    /// Largest hidden width drawn; p tops out around width².
    pub max_width: usize,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            instances: 50,
            tolerance: 1e-6,
            max_width: 96,
        }
    }
}
