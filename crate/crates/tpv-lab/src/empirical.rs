//! Perturb-and-retrain Monte Carlo estimation of TPV for label noise, SGD
//! stationary noise, and quantization noise.
//!
//! Every run passes through the first-order validity filter: a relative
//! finite-difference Taylor error computed on a fixed reference subset of
//! training inputs, with runs above 1e-3 discarded. Run-discard bookkeeping
//! is mandatory and serialized; a report without per-run diagnostics is not
//! considered valid output.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{add_label_noise, Dataset};
use crate::linalg::Matrix;
use crate::nn::{Network, ParamVector};
use crate::rng::{derive_seed, StreamRng};
use crate::train::{sgd_snapshot_run, train_mse, BatchSize, TrainConfig, TrainError};

/// Runs with Taylor error above this are discarded.
pub const TAYLOR_THRESHOLD: f64 = 1e-3;
/// Finite-difference step of the Taylor check.
pub const TAYLOR_STEP: f64 = 1e-2;
/// Size of the fixed reference subset for the Taylor check.
pub const TAYLOR_REF_SAMPLES: usize = 128;
/// Half-width of the stability band: ratio within [1/(1+w), 1+w].
pub const STABILITY_BAND_HALF_WIDTH: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("reference model train loss {loss} above tolerance {tol}")]
    ReferenceNotConverged { loss: f64, tol: f64 },
    #[error("all {total} runs discarded")]
    AllRunsDiscarded { total: usize, diagnostics: Vec<RunDiagnostic> },
    #[error("median Taylor error {median} above threshold at delta {delta}")]
    TaylorMedianExceeded { median: f64, delta: f64 },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
}

/// Label-noise retraining protocol (fresh noise per run, retrain from w⋆).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelNoiseProtocol {
    pub sigma: f64,
    pub retrain: TrainConfig,
    pub runs: usize,
    /// Optional gate on the clean reference train loss.
    pub ref_loss_tol: Option<f64>,
}

/// Stationary-SGD snapshot protocol (each snapshot is one run).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SgdStationaryProtocol {
    pub lr: f64,
    pub batch: usize,
    pub momentum: f64,
    pub burn_in: usize,
    pub snapshot_every: usize,
    pub total_steps: usize,
}

/// Uniform per-coordinate quantization noise, no retraining.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantizationProtocol {
    pub delta: f64,
    pub n_draws: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum PerturbProtocol {
    LabelNoise(LabelNoiseProtocol),
    SgdStationary(SgdStationaryProtocol),
    Quantization(QuantizationProtocol),
}

impl PerturbProtocol {
    pub fn kind_label(&self) -> &'static str {
        match self {
            PerturbProtocol::LabelNoise(_) => "label_noise",
            PerturbProtocol::SgdStationary(_) => "sgd_noise",
            PerturbProtocol::Quantization(_) => "quantization",
        }
    }
}

/// Why a run was kept or discarded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunDiagnostic {
    pub run_index: usize,
    pub taylor_error: f64,
    pub loss_decreased: bool,
    pub kept: bool,
    pub reason: String,
}

/// One protocol's aggregated result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TpvReport {
    pub tpv_train: f64,
    pub tpv_test: f64,
    pub theoretical_tpv: Option<f64>,
    pub taylor_errors: Vec<f64>,
    pub runs_kept: usize,
    pub runs_discarded: usize,
    /// Clean-reference generalization gap L_test − L_train.
    pub gen_gap: f64,
    pub diagnostics: Vec<RunDiagnostic>,
    pub metadata: BTreeMap<String, String>,
}

/// Empirical TPV: mean over runs and samples of the squared output
/// deviation from the reference network (coordinates summed for K > 1).
pub fn empirical_tpv(
    reference: &Network,
    perturbed: &[ParamVector],
    xs: &Matrix,
) -> Result<f64, ProtocolError> {
    if perturbed.is_empty() {
        return Err(ProtocolError::EmptyInput("no perturbed parameter sets"));
    }
    if xs.rows() == 0 {
        return Err(ProtocolError::EmptyInput("no evaluation samples"));
    }
    let base = reference.batch_forward(xs)?;
    let mut acc = 0.0;
    for params in perturbed {
        let net = reference.with_params(params.clone());
        let out = net.batch_forward(xs)?;
        for (&a, &b) in out.as_slice().iter().zip(base.as_slice()) {
            let d = a - b;
            acc += d * d;
        }
    }
    Ok(acc / (perturbed.len() as f64 * xs.rows() as f64))
}

/// Relative finite-difference Taylor error of a perturbed parameter vector:
/// E_x[((f_w − f_w⋆) − (f_{w⋆+hΔ} − f_w⋆)/h)²] / (E_x[(f_w − f_w⋆)²] + 1e-12)
/// with Δ = w − w⋆ over the reference inputs.
pub fn taylor_validity(
    reference: &Network,
    perturbed: &ParamVector,
    x_ref: &Matrix,
    h: f64,
) -> Result<f64, ProtocolError> {
    assert!(h > 0.0);
    if x_ref.rows() == 0 {
        return Err(ProtocolError::EmptyInput("taylor reference subset"));
    }
    let base = reference.batch_forward(x_ref)?;
    let full = reference
        .with_params(perturbed.clone())
        .batch_forward(x_ref)?;
    let mut small_params = reference.params.clone();
    let delta = perturbed.sub(&reference.params);
    small_params.axpy(h, &delta);
    let stepped = reference.with_params(small_params).batch_forward(x_ref)?;

    let n = x_ref.rows() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&f_full, &f_base), &f_step) in full
        .as_slice()
        .iter()
        .zip(base.as_slice())
        .zip(stepped.as_slice())
    {
        let direct = f_full - f_base;
        let linearized = (f_step - f_base) / h;
        num += (direct - linearized) * (direct - linearized);
        den += direct * direct;
    }
    Ok((num / n) / (den / n + 1e-12))
}

/// The fixed, seeded reference subset of training inputs used by the Taylor
/// filter for one configuration.
pub fn taylor_reference_subset(train_xs: &Matrix, seed: u64) -> Matrix {
    let n = train_xs.rows();
    let take = TAYLOR_REF_SAMPLES.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = StreamRng::new(derive_seed(seed, &[PURPOSE_TAYLOR]));
    rng.shuffle(&mut order);
    let mut out = Matrix::zeros(take, train_xs.cols());
    for (r, &i) in order.iter().take(take).enumerate() {
        out.row_mut(r).copy_from_slice(train_xs.row(i));
    }
    out
}

const PURPOSE_TAYLOR: u64 = 0x7461_796c;
const PURPOSE_NOISE_RUN: u64 = 0x6c6e_7273;
const PURPOSE_SGD: u64 = 0x7367_6472;
const PURPOSE_QUANT: u64 = 0x7175_6e74;

/// Gap statistics between the train- and test-side TPV of one report.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StabilityGap {
    pub abs_gap: f64,
    /// tpv_train / tpv_test; +∞ when the test TPV is zero but train is not.
    pub ratio: f64,
}

pub fn stability_gap(report: &TpvReport) -> StabilityGap {
    let ratio = if report.tpv_test == 0.0 {
        if report.tpv_train == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        report.tpv_train / report.tpv_test
    };
    StabilityGap {
        abs_gap: (report.tpv_train - report.tpv_test).abs(),
        ratio,
    }
}

impl StabilityGap {
    /// Membership in the symmetric band ratio ∈ [1/(1+w), 1+w].
    pub fn in_band(&self, half_width: f64) -> bool {
        self.ratio >= 1.0 / (1.0 + half_width) && self.ratio <= 1.0 + half_width
    }
}

fn aggregate_report(
    reference: &Network,
    kept_params: &[ParamVector],
    diagnostics: Vec<RunDiagnostic>,
    train_ds: &Dataset,
    test_ds: &Dataset,
    theoretical_tpv: Option<f64>,
    metadata: BTreeMap<String, String>,
) -> Result<TpvReport, ProtocolError> {
    let total = diagnostics.len();
    let kept = kept_params.len();
    if kept == 0 {
        return Err(ProtocolError::AllRunsDiscarded {
            total,
            diagnostics,
        });
    }
    let tpv_train = empirical_tpv(reference, kept_params, &train_ds.xs)?;
    let tpv_test = empirical_tpv(reference, kept_params, &test_ds.xs)?;
    let train_loss = reference.loss_mse(&train_ds.xs, &train_ds.ys)?;
    let test_loss = reference.loss_mse(&test_ds.xs, &test_ds.ys)?;
    Ok(TpvReport {
        tpv_train,
        tpv_test,
        theoretical_tpv,
        taylor_errors: diagnostics.iter().map(|d| d.taylor_error).collect(),
        runs_kept: kept,
        runs_discarded: total - kept,
        gen_gap: test_loss - train_loss,
        diagnostics,
        metadata,
    })
}

/// Label-noise protocol: per run, inject fresh noise, retrain from w⋆ with
/// the protocol's config (mini-batch order held fixed across runs), then
/// keep the run only if the loss went down and the Taylor check passed.
pub fn run_label_noise_protocol(
    reference: &Network,
    train_ds: &Dataset,
    test_ds: &Dataset,
    proto: &LabelNoiseProtocol,
    seed: u64,
) -> Result<TpvReport, ProtocolError> {
    assert!(proto.runs >= 2, "need at least two runs");
    if let Some(tol) = proto.ref_loss_tol {
        let loss = reference.loss_mse(&train_ds.xs, &train_ds.ys)?;
        if loss >= tol {
            return Err(ProtocolError::ReferenceNotConverged { loss, tol });
        }
    }
    let x_ref = taylor_reference_subset(&train_ds.xs, seed);
    let mut retrain = proto.retrain.clone();
    if retrain.proximity_gamma > 0.0 && retrain.proximity_anchor.is_none() {
        retrain.proximity_anchor = Some(reference.params.clone());
    }

    // Runs are independent jobs with disjoint seeds; the collect keeps
    // run-index order so aggregation is bit-reproducible under any
    // scheduling.
    let per_run: Vec<Result<(RunDiagnostic, Option<ParamVector>), ProtocolError>> = (0..proto
        .runs)
        .into_par_iter()
        .map(|run| {
            let noisy = add_label_noise(
                train_ds,
                proto.sigma,
                derive_seed(seed, &[PURPOSE_NOISE_RUN, run as u64]),
            );
            let trace = train_mse(reference, &noisy, &retrain)?;
            if trace.diverged {
                return Ok((
                    RunDiagnostic {
                        run_index: run,
                        taylor_error: f64::MAX,
                        loss_decreased: false,
                        kept: false,
                        reason: "diverged".into(),
                    },
                    None,
                ));
            }
            let taylor = taylor_validity(reference, &trace.final_params, &x_ref, TAYLOR_STEP)?;
            let ok_loss = trace.loss_decreased || proto.sigma == 0.0;
            let ok_taylor = taylor < TAYLOR_THRESHOLD;
            let kept = ok_loss && ok_taylor;
            let diag = RunDiagnostic {
                run_index: run,
                taylor_error: taylor,
                loss_decreased: trace.loss_decreased,
                kept,
                reason: if kept {
                    "kept".into()
                } else if !ok_loss {
                    "loss did not decrease".into()
                } else {
                    "taylor error above threshold".into()
                },
            };
            Ok((diag, kept.then_some(trace.final_params)))
        })
        .collect();

    let mut kept_params = Vec::new();
    let mut diagnostics = Vec::new();
    for item in per_run {
        let (diag, params) = item?;
        diagnostics.push(diag);
        if let Some(p) = params {
            kept_params.push(p);
        }
    }

    let mut metadata = BTreeMap::new();
    metadata.insert("protocol".into(), "label_noise".into());
    metadata.insert("sigma".into(), proto.sigma.to_string());
    metadata.insert("runs".into(), proto.runs.to_string());
    metadata.insert("seed".into(), seed.to_string());
    metadata.insert(
        "proximity_gamma".into(),
        proto.retrain.proximity_gamma.to_string(),
    );
    metadata.insert("taylor_subset".into(), "fixed per configuration".into());
    aggregate_report(
        reference,
        &kept_params,
        diagnostics,
        train_ds,
        test_ds,
        None,
        metadata,
    )
}

/// Stationary-SGD protocol: snapshots collected after burn-in are treated
/// as runs and pass through the same Taylor filter.
pub fn run_sgd_noise_protocol(
    reference: &Network,
    train_ds: &Dataset,
    test_ds: &Dataset,
    proto: &SgdStationaryProtocol,
    seed: u64,
) -> Result<TpvReport, ProtocolError> {
    let x_ref = taylor_reference_subset(&train_ds.xs, seed);
    let cfg = TrainConfig {
        lr: proto.lr,
        momentum: proto.momentum,
        epochs: 1,
        batch_size: BatchSize::Size(proto.batch.min(train_ds.len())),
        schedule: crate::train::Schedule::Constant,
        weight_decay: 0.0,
        proximity_gamma: 0.0,
        proximity_anchor: None,
        shuffle: crate::train::Shuffle::Never,
        rng_seed: derive_seed(seed, &[PURPOSE_SGD]),
    };
    let snapshots = sgd_snapshot_run(
        reference,
        train_ds,
        &cfg,
        proto.burn_in,
        proto.snapshot_every,
        proto.total_steps,
    )?;

    let mut kept_params = Vec::new();
    let mut diagnostics = Vec::new();
    for (run, params) in snapshots.into_iter().enumerate() {
        let taylor = taylor_validity(reference, &params, &x_ref, TAYLOR_STEP)?;
        let kept = taylor < TAYLOR_THRESHOLD;
        diagnostics.push(RunDiagnostic {
            run_index: run,
            taylor_error: taylor,
            loss_decreased: true,
            kept,
            reason: if kept {
                "kept".into()
            } else {
                "taylor error above threshold".into()
            },
        });
        if kept {
            kept_params.push(params);
        }
    }

    let mut metadata = BTreeMap::new();
    metadata.insert("protocol".into(), "sgd_noise".into());
    metadata.insert("lr".into(), proto.lr.to_string());
    metadata.insert("batch".into(), proto.batch.to_string());
    metadata.insert("momentum".into(), proto.momentum.to_string());
    metadata.insert("burn_in".into(), proto.burn_in.to_string());
    metadata.insert("snapshot_every".into(), proto.snapshot_every.to_string());
    metadata.insert("total_steps".into(), proto.total_steps.to_string());
    metadata.insert("seed".into(), seed.to_string());
    aggregate_report(
        reference,
        &kept_params,
        diagnostics,
        train_ds,
        test_ds,
        None,
        metadata,
    )
}

/// Quantization protocol: i.i.d. Unif(−δ/2, δ/2) perturbations on every
/// coordinate, no retraining. Fails if the median Taylor error at this δ
/// breaches the threshold.
pub fn run_quantization_protocol(
    reference: &Network,
    train_ds: &Dataset,
    test_ds: &Dataset,
    proto: &QuantizationProtocol,
    seed: u64,
) -> Result<TpvReport, ProtocolError> {
    assert!(proto.n_draws >= 2, "need at least two draws");
    assert!(proto.delta >= 0.0);
    let x_ref = taylor_reference_subset(&train_ds.xs, seed);
    let p = reference.param_count();
    let mut rng = StreamRng::new(derive_seed(seed, &[PURPOSE_QUANT]));

    let mut all_params = Vec::with_capacity(proto.n_draws);
    let mut taylor_errors = Vec::with_capacity(proto.n_draws);
    for _ in 0..proto.n_draws {
        let mut params = reference.params.clone();
        for w in params.as_mut_slice().iter_mut().take(p) {
            *w += rng.uniform_in(-proto.delta / 2.0, proto.delta / 2.0);
        }
        let taylor = taylor_validity(reference, &params, &x_ref, TAYLOR_STEP)?;
        taylor_errors.push(taylor);
        all_params.push(params);
    }

    let mut sorted = taylor_errors.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    if proto.delta > 0.0 && median >= TAYLOR_THRESHOLD {
        return Err(ProtocolError::TaylorMedianExceeded {
            median,
            delta: proto.delta,
        });
    }

    let mut kept_params = Vec::new();
    let mut diagnostics = Vec::new();
    for (run, (params, &taylor)) in all_params.into_iter().zip(&taylor_errors).enumerate() {
        let kept = taylor < TAYLOR_THRESHOLD;
        diagnostics.push(RunDiagnostic {
            run_index: run,
            taylor_error: taylor,
            loss_decreased: true,
            kept,
            reason: if kept {
                "kept".into()
            } else {
                "taylor error above threshold".into()
            },
        });
        if kept {
            kept_params.push(params);
        }
    }

    let mut metadata = BTreeMap::new();
    metadata.insert("protocol".into(), "quantization".into());
    metadata.insert("delta".into(), proto.delta.to_string());
    metadata.insert("n_draws".into(), proto.n_draws.to_string());
    metadata.insert("seed".into(), seed.to_string());
    aggregate_report(
        reference,
        &kept_params,
        diagnostics,
        train_ds,
        test_ds,
        None,
        metadata,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{sample_dataset, TeacherKind, TeacherSpec};
    use crate::nn::{init_network, MlpConfig};
    use crate::theory::{estimate_heff, hessian_trace_proxy, Split};

    fn linear_net(d: usize, seed: u64) -> Network {
        init_network(&MlpConfig::new(d, vec![], 1, seed))
    }

    fn small_mlp(d: usize, width: usize, seed: u64) -> Network {
        init_network(&MlpConfig::new(d, vec![width], 1, seed))
    }

    fn dataset(d: usize, n: usize, seed: u64, stream: u64) -> Dataset {
        sample_dataset(
            &TeacherSpec {
                kind: TeacherKind::LinearGaussian,
                input_dim: d,
                seed,
            },
            n,
            stream,
        )
    }

    #[test]
    fn unperturbed_params_give_zero_tpv() {
        let net = small_mlp(3, 5, 1);
        let xs = dataset(3, 10, 2, 0).xs;
        let tpv = empirical_tpv(&net, &[net.params.clone()], &xs).unwrap();
        assert_eq!(tpv, 0.0);
    }

    #[test]
    fn linear_model_unit_vectors_closed_form() {
        // f = wᵀx (bias unperturbed): with xs the unit vectors, empirical
        // TPV of one δw is ‖δw‖²/d.
        let d = 4;
        let net = linear_net(d, 3);
        let xs = Matrix::identity(d);
        let mut params = net.params.clone();
        let delta = [0.3, -0.2, 0.5, 0.1];
        for (w, &dv) in params.as_mut_slice().iter_mut().zip(&delta) {
            *w += dv;
        }
        let tpv = empirical_tpv(&net, &[params], &xs).unwrap();
        let expect = delta.iter().map(|x| x * x).sum::<f64>() / d as f64;
        assert!((tpv - expect).abs() < 1e-14);
    }

    #[test]
    fn gaussian_draws_match_trace_form() {
        // Small isotropic Gaussian δw: empirical TPV ≈ σ²·Tr(H_eff).
        let net = small_mlp(4, 6, 5);
        let xs = dataset(4, 40, 6, 0).xs;
        let sigma = 1e-4;
        let mut rng = StreamRng::new(7);
        let draws: Vec<ParamVector> = (0..4000)
            .map(|_| {
                let mut p = net.params.clone();
                for w in p.as_mut_slice() {
                    *w += sigma * rng.normal();
                }
                p
            })
            .collect();
        // Taylor sanity on the first draw.
        let x_ref = taylor_reference_subset(&xs, 1);
        let t = taylor_validity(&net, &draws[0], &x_ref, TAYLOR_STEP).unwrap();
        assert!(t < 1e-4, "perturbation too large for the linear regime: {t}");

        let tpv = empirical_tpv(&net, &draws, &xs).unwrap();
        let jac = net.output_jacobian(&xs).unwrap();
        let h = estimate_heff(&jac, 40, Split::Train).unwrap();
        let expect = sigma * sigma * h.matrix.trace();
        assert!(
            (tpv / expect - 1.0).abs() < 0.05,
            "tpv {tpv} vs trace {expect}"
        );
    }

    #[test]
    fn taylor_error_zero_for_reference_and_linear_models() {
        let net = small_mlp(3, 4, 8);
        let x_ref = dataset(3, 16, 9, 0).xs;
        let t = taylor_validity(&net, &net.params, &x_ref, TAYLOR_STEP).unwrap();
        assert_eq!(t, 0.0);

        // Linear model is its own linearization: error 0 for any Δ.
        let lin = linear_net(5, 10);
        let x_ref = dataset(5, 16, 11, 0).xs;
        let mut params = lin.params.clone();
        for (i, w) in params.as_mut_slice().iter_mut().enumerate() {
            *w += 0.5 * (i as f64 + 1.0);
        }
        let t = taylor_validity(&lin, &params, &x_ref, TAYLOR_STEP).unwrap();
        assert!(t < 1e-20, "linear taylor error {t}");
    }

    #[test]
    fn taylor_error_grows_with_perturbation_scale() {
        let net = small_mlp(4, 8, 12);
        let x_ref = dataset(4, 64, 13, 0).xs;
        let mut rng = StreamRng::new(14);
        let dir: Vec<f64> = (0..net.param_count()).map(|_| rng.normal()).collect();
        let taylor_at = |scale: f64| {
            let mut p = net.params.clone();
            for (w, &d) in p.as_mut_slice().iter_mut().zip(&dir) {
                *w += scale * d;
            }
            taylor_validity(&net, &p, &x_ref, TAYLOR_STEP).unwrap()
        };
        let small = taylor_at(1e-4);
        let large = taylor_at(1e-3 * 10.0);
        assert!(small < TAYLOR_THRESHOLD);
        assert!(large > small * 10.0, "small {small}, large {large}");
    }

    #[test]
    fn label_noise_with_zero_sigma_gives_zero_tpv() {
        let d = 3;
        let net = linear_net(d, 15);
        let train = dataset(d, 20, 16, 0);
        let test = dataset(d, 30, 16, 1);
        // Perfectly fit reference so retraining stays put.
        let mut train_fit = train.clone();
        train_fit.ys = net.batch_forward(&train.xs).unwrap();
        let proto = LabelNoiseProtocol {
            sigma: 0.0,
            retrain: TrainConfig::full_batch(0.01, 20),
            runs: 3,
            ref_loss_tol: Some(1e-10),
        };
        let report = run_label_noise_protocol(&net, &train_fit, &test, &proto, 17).unwrap();
        assert!(report.tpv_train < 1e-20);
        assert!(report.tpv_test < 1e-20);
        assert_eq!(report.runs_kept, 3);
        assert_eq!(report.runs_discarded, 0);
    }

    #[test]
    fn label_noise_linear_matches_min_norm_oracle() {
        // Overparameterized linear model (d > n): gradient descent from w⋆
        // stays in the row space, so retraining converges to the min-norm
        // δw = Xᵀ(XXᵀ)⁻¹ε. Empirical test TPV must match the analytic
        // closed-form oracle built from per-run noise vectors.
        let d = 24;
        let n = 8;
        let net = linear_net(d, 18);
        let mut train = dataset(d, n, 19, 0);
        train.ys = net.batch_forward(&train.xs).unwrap(); // interpolating ref
        let test = dataset(d, 64, 19, 1);

        let sigma = 1e-3;
        let runs = 24;
        let proto = LabelNoiseProtocol {
            sigma,
            retrain: TrainConfig {
                momentum: 0.9,
                ..TrainConfig::full_batch(5e-3, 4000)
            },
            runs,
            ref_loss_tol: Some(1e-12),
        };
        let seed = 20;
        let report = run_label_noise_protocol(&net, &train, &test, &proto, seed).unwrap();
        assert_eq!(report.runs_kept, runs, "all runs should survive filters");

        // Oracle: analytic min-norm retraining on the same noise draws.
        // The Jacobian includes the bias column, matching what GD perturbs.
        let jac = net.output_jacobian(&train.xs).unwrap();
        let svd = crate::linalg::compact_svd(&jac, 1e-10).unwrap();
        let mut oracle_params = Vec::new();
        for run in 0..runs {
            let noisy = add_label_noise(
                &train,
                sigma,
                derive_seed(seed, &[PURPOSE_NOISE_RUN, run as u64]),
            );
            let eps: Vec<f64> = (0..n)
                .map(|i| noisy.ys.get(i, 0) - train.ys.get(i, 0))
                .collect();
            let dw = crate::linalg::min_norm_solve(&svd, &eps).unwrap();
            let mut p = net.params.clone();
            for (w, &d) in p.as_mut_slice().iter_mut().zip(&dw) {
                *w += d;
            }
            oracle_params.push(p);
        }
        let oracle_test = empirical_tpv(&net, &oracle_params, &test.xs).unwrap();
        assert!(
            (report.tpv_test / oracle_test - 1.0).abs() < 0.02,
            "retrained {} vs analytic {}",
            report.tpv_test,
            oracle_test
        );
    }

    #[test]
    fn sgd_protocol_zero_lr_and_interpolating_minimum() {
        let d = 4;
        let net = linear_net(d, 21);
        let mut train = dataset(d, 32, 22, 0);
        train.ys = net.batch_forward(&train.xs).unwrap();
        let test = dataset(d, 32, 22, 1);
        // At a zero-residual minimum every sampled batch gradient is zero.
        let proto = SgdStationaryProtocol {
            lr: 1e-3,
            batch: 8,
            momentum: 0.0,
            burn_in: 10,
            snapshot_every: 5,
            total_steps: 60,
        };
        let report = run_sgd_noise_protocol(&net, &train, &test, &proto, 23).unwrap();
        assert!(report.tpv_train < 1e-24);
        assert_eq!(report.runs_kept, 10);

        // Tiny lr bounds TPV by (lr·grad)² scale.
        let mut noisy_train = dataset(d, 32, 24, 0);
        noisy_train.ys = {
            let mut ys = net.batch_forward(&noisy_train.xs).unwrap();
            let mut rng = StreamRng::new(25);
            for v in ys.as_mut_slice() {
                *v += 0.1 * rng.normal();
            }
            ys
        };
        let tiny = SgdStationaryProtocol {
            lr: 1e-25,
            ..proto
        };
        let report = run_sgd_noise_protocol(&net, &noisy_train, &test, &tiny, 26).unwrap();
        assert!(report.tpv_train < 1e-40, "tpv {}", report.tpv_train);
    }

    #[test]
    fn quantization_protocol_matches_formula() {
        let d = 10;
        let n = 50;
        let net = linear_net(d, 27);
        let train = dataset(d, n, 28, 0);
        let test = dataset(d, 60, 28, 1);
        let delta = 1e-3;
        let proto = QuantizationProtocol {
            delta,
            n_draws: 20_000,
        };
        let report = run_quantization_protocol(&net, &train, &test, &proto, 29).unwrap();
        let jac = net.output_jacobian(&train.xs).unwrap();
        let trace = hessian_trace_proxy(&jac, n);
        let expect = crate::theory::tpv_quantization(delta, trace);
        assert!(
            (report.tpv_train / expect - 1.0).abs() < 0.03,
            "tpv {} vs formula {}",
            report.tpv_train,
            expect
        );

        // δ = 0 is exactly zero.
        let zero = QuantizationProtocol {
            delta: 0.0,
            n_draws: 10,
        };
        let z = run_quantization_protocol(&net, &train, &test, &zero, 30).unwrap();
        assert_eq!(z.tpv_train, 0.0);
    }

    #[test]
    fn quantization_scales_quadratically() {
        let net = small_mlp(4, 6, 31);
        let train = dataset(4, 40, 32, 0);
        let test = dataset(4, 40, 32, 1);
        let report_at = |delta: f64, seed: u64| {
            run_quantization_protocol(
                &net,
                &train,
                &test,
                &QuantizationProtocol {
                    delta,
                    n_draws: 20_000,
                },
                seed,
            )
            .unwrap()
            .tpv_train
        };
        let full = report_at(2e-3, 33);
        let half = report_at(1e-3, 34);
        assert!(
            (full / half / 4.0 - 1.0).abs() < 0.1,
            "quadratic scaling violated: {full} vs {half}"
        );
    }

    #[test]
    fn quantization_median_gate_trips_for_huge_delta() {
        let net = small_mlp(4, 8, 35);
        let train = dataset(4, 40, 36, 0);
        let test = dataset(4, 40, 36, 1);
        let proto = QuantizationProtocol {
            delta: 50.0,
            n_draws: 8,
        };
        let err = run_quantization_protocol(&net, &train, &test, &proto, 37).unwrap_err();
        assert!(matches!(err, ProtocolError::TaylorMedianExceeded { .. }));
    }

    #[test]
    fn stability_gap_cases() {
        let mut report = TpvReport {
            tpv_train: 1.0,
            tpv_test: 1.0,
            theoretical_tpv: None,
            taylor_errors: vec![],
            runs_kept: 2,
            runs_discarded: 0,
            gen_gap: 0.0,
            diagnostics: vec![],
            metadata: BTreeMap::new(),
        };
        let g = stability_gap(&report);
        assert_eq!(g.abs_gap, 0.0);
        assert_eq!(g.ratio, 1.0);
        assert!(g.in_band(STABILITY_BAND_HALF_WIDTH));

        report.tpv_test = 2.0;
        let g = stability_gap(&report);
        assert_eq!(g.ratio, 0.5);
        assert!(!g.in_band(STABILITY_BAND_HALF_WIDTH));

        report.tpv_test = 0.0;
        let g = stability_gap(&report);
        assert!(g.ratio.is_infinite());
    }

    #[test]
    fn kept_runs_all_satisfy_the_filter() {
        // Filter soundness: every kept diagnostic has taylor < threshold and
        // loss_decreased (label-noise protocol).
        let d = 6;
        let net = small_mlp(d, 24, 38);
        let spec = TeacherSpec {
            kind: TeacherKind::LinearGaussian,
            input_dim: d,
            seed: 39,
        };
        let train = sample_dataset(&spec, 32, 0);
        let test = sample_dataset(&spec, 32, 1);
        let trace = train_mse(&net, &train, &TrainConfig::full_batch(2e-2, 4000)).unwrap();
        let reference = net.with_params(trace.final_params);
        let ref_loss = reference.loss_mse(&train.xs, &train.ys).unwrap();
        assert!(ref_loss < 1e-8, "reference under-trained: loss {ref_loss}");
        let proto = LabelNoiseProtocol {
            sigma: 0.01,
            retrain: TrainConfig::full_batch(2e-2, 100),
            runs: 6,
            ref_loss_tol: None,
        };
        let report = run_label_noise_protocol(&reference, &train, &test, &proto, 40).unwrap();
        for diag in &report.diagnostics {
            if diag.kept {
                assert!(diag.taylor_error < TAYLOR_THRESHOLD);
                assert!(diag.loss_decreased);
            }
        }
        assert_eq!(
            report.runs_kept + report.runs_discarded,
            report.diagnostics.len()
        );
    }

    #[test]
    fn scale_equivariance_of_empirical_tpv() {
        // Scaling δw by c multiplies TPV by c² in the Taylor regime.
        let net = small_mlp(4, 6, 41);
        let xs = dataset(4, 30, 42, 0).xs;
        let mut rng = StreamRng::new(43);
        let dir: Vec<f64> = (0..net.param_count()).map(|_| 1e-4 * rng.normal()).collect();
        let perturbed_at = |c: f64| {
            let mut p = net.params.clone();
            for (w, &d) in p.as_mut_slice().iter_mut().zip(&dir) {
                *w += c * d;
            }
            p
        };
        let base = empirical_tpv(&net, &[perturbed_at(1.0)], &xs).unwrap();
        let doubled = empirical_tpv(&net, &[perturbed_at(2.0)], &xs).unwrap();
        assert!(
            (doubled / base / 4.0 - 1.0).abs() < 0.01,
            "c² scaling violated"
        );
    }
}
