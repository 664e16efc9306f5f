//! `sgd-lyapunov`: three-way comparison of stationary SGD prediction
//! variance on a linear-regression instance with planted residuals —
//! empirical snapshot TPV, the Lyapunov solve Tr(H·C_sgd), and the
//! closed-form η·σ²·Tr(H)/(2b) — plus η and 1/b scaling checks.

use std::path::Path;

use serde::Serialize;

use crate::datagen::{add_label_noise, sample_dataset, TeacherKind, TeacherSpec};
use crate::empirical::{run_sgd_noise_protocol, SgdStationaryProtocol};
use crate::linalg::{compact_svd, min_norm_solve, sym_eigen::sym_eigenvalues};
use crate::nn::{init_network, MlpConfig, Network, ParamVector};
use crate::rng::derive_seed;
use crate::sgd_noise::{residual_variance, stationary_covariance, GradientCovariance};
use crate::theory::{estimate_heff, tpv_sgd_theoretical, Split};

use super::config::{ExperimentConfig, SgdLyapunovConfig};
use super::{ensure_out_dir, write_json, write_resolved_config, CliError};

const TAG_TEACHER: u64 = 21;
const TAG_NOISE: u64 = 22;
const TAG_PROTO: u64 = 23;

#[derive(Debug, Clone, Serialize)]
pub struct ThreeWayEntry {
    pub eta: f64,
    pub batch: usize,
    pub tpv_empirical: f64,
    pub tpv_lyapunov: f64,
    pub tpv_formula: f64,
    pub empirical_over_lyapunov: f64,
    pub lyapunov_over_formula: f64,
    pub empirical_over_formula: f64,
    pub snapshots: usize,
}

#[derive(Debug, Serialize)]
pub struct SgdLyapunovReport {
    pub input_dim: usize,
    pub n_train: usize,
    pub residual_variance: f64,
    pub hessian_trace: f64,
    pub lambda_max: f64,
    pub entries: Vec<ThreeWayEntry>,
    /// Lyapunov TPV ratio when η doubles (per batch), ideal 2.
    pub eta_scaling_ratios: Vec<f64>,
    /// Lyapunov TPV ratio when b doubles (per η), ideal 0.5.
    pub batch_scaling_ratios: Vec<f64>,
}

/// The trained linear model (with bias), its residuals, and the instance
/// data. The least-squares optimum is computed analytically so the SGD
/// snapshots genuinely orbit a minimum.
pub struct LinearInstance {
    pub reference: Network,
    pub train: crate::datagen::Dataset,
    pub test: crate::datagen::Dataset,
    pub residuals: Vec<f64>,
    pub h_eff: crate::linalg::Matrix,
    pub hessian_trace: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
}

pub fn build_linear_instance(
    lyap: &SgdLyapunovConfig,
    base_seed: u64,
) -> Result<LinearInstance, CliError> {
    let teacher = TeacherSpec {
        kind: TeacherKind::LinearGaussian,
        input_dim: lyap.input_dim,
        seed: derive_seed(base_seed, &[TAG_TEACHER]),
    };
    let clean = sample_dataset(&teacher, lyap.n_train, 0);
    let train = add_label_noise(&clean, lyap.noise_sigma, derive_seed(base_seed, &[TAG_NOISE]));
    let test = sample_dataset(&teacher, lyap.test_size, 1);

    // Least-squares fit of the linear-with-bias model via the pseudoinverse
    // of the design Jacobian [X 1].
    let shell = init_network(&MlpConfig::new(lyap.input_dim, vec![], 1, 0));
    let design = shell
        .output_jacobian(&train.xs)
        .map_err(|e| CliError::Failed(format!("design jacobian: {e}")))?;
    let svd = compact_svd(&design, 1e-12)
        .map_err(|e| CliError::Failed(format!("design svd: {e}")))?;
    let targets: Vec<f64> = (0..train.len()).map(|i| train.ys.get(i, 0)).collect();
    let w_star = min_norm_solve(&svd, &targets)
        .map_err(|e| CliError::Failed(format!("least squares: {e}")))?;
    let reference = shell.with_params(ParamVector(w_star));

    let preds = reference
        .batch_forward(&train.xs)
        .map_err(|e| CliError::Failed(format!("forward: {e}")))?;
    let residuals: Vec<f64> = (0..train.len())
        .map(|i| preds.get(i, 0) - train.ys.get(i, 0))
        .collect();
    let h_eff = estimate_heff(&design, train.len(), Split::Train)
        .map_err(|e| CliError::Failed(format!("h_eff: {e}")))?;
    let hessian_trace = h_eff.matrix.trace();
    let eigs = sym_eigenvalues(&h_eff.matrix);
    let lambda_max = eigs[0];
    let lambda_min = *eigs.last().expect("nonempty spectrum");
    if lambda_min <= 0.0 {
        return Err(CliError::Failed(
            "H_eff is singular; need n_train > input_dim + 1".into(),
        ));
    }
    Ok(LinearInstance {
        reference,
        train,
        test,
        residuals,
        h_eff: h_eff.matrix,
        hessian_trace,
        lambda_max,
        lambda_min,
    })
}

/// Run the three-way comparison for one (η, b) setting.
pub fn three_way_entry(
    inst: &LinearInstance,
    lyap: &SgdLyapunovConfig,
    eta: f64,
    batch: usize,
    seed: u64,
) -> Result<ThreeWayEntry, CliError> {
    let jac = inst
        .reference
        .output_jacobian(&inst.train.xs)
        .map_err(|e| CliError::Failed(format!("jacobian: {e}")))?;
    let cov = GradientCovariance::new(&jac, &inst.residuals, batch)
        .map_err(|e| CliError::Failed(format!("gradient covariance: {e}")))?;
    let c_sgd = stationary_covariance(&inst.h_eff, &cov.sigma_xi, eta).map_err(|e| {
        CliError::Failed(format!(
            "{e}; stability needs eta < 2/lambda_max = {}",
            2.0 / inst.lambda_max
        ))
    })?;
    let tpv_lyapunov = inst.h_eff.matmul(&c_sgd).trace();

    let sigma_res2 = residual_variance(&inst.residuals)
        .map_err(|e| CliError::Failed(format!("residual variance: {e}")))?;
    let tpv_formula = tpv_sgd_theoretical(eta, batch, sigma_res2, inst.hessian_trace);

    // Burn-in and cadence scale with the slowest OU mode so the chain
    // reaches stationarity and snapshots decorrelate.
    let relax = (1.0 / (eta * inst.lambda_min)).ceil() as usize;
    let burn_in = 8 * relax;
    let snapshot_every = (relax / 2).max(1);
    let proto = SgdStationaryProtocol {
        lr: eta,
        batch,
        momentum: 0.0,
        burn_in,
        snapshot_every,
        total_steps: burn_in + lyap.snapshots * snapshot_every,
    };
    let report = run_sgd_noise_protocol(
        &inst.reference,
        &inst.train,
        &inst.test,
        &proto,
        seed,
    )
    .map_err(|e| CliError::Failed(format!("sgd protocol: {e}")))?;

    Ok(ThreeWayEntry {
        eta,
        batch,
        tpv_empirical: report.tpv_train,
        tpv_lyapunov,
        tpv_formula,
        empirical_over_lyapunov: report.tpv_train / tpv_lyapunov,
        lyapunov_over_formula: tpv_lyapunov / tpv_formula,
        empirical_over_formula: report.tpv_train / tpv_formula,
        snapshots: report.runs_kept,
    })
}

pub fn compute_report(cfg: &ExperimentConfig) -> Result<SgdLyapunovReport, CliError> {
    let lyap = &cfg.sgd_lyapunov;
    let inst = build_linear_instance(lyap, cfg.base_seed)?;
    let sigma_res2 = residual_variance(&inst.residuals)
        .map_err(|e| CliError::Failed(format!("residual variance: {e}")))?;

    let mut entries = Vec::new();
    for (ei, &frac) in lyap.eta_fractions.iter().enumerate() {
        let eta = frac / inst.lambda_max;
        for (bi, &batch) in lyap.batches.iter().enumerate() {
            entries.push(three_way_entry(
                &inst,
                lyap,
                eta,
                batch,
                derive_seed(cfg.base_seed, &[TAG_PROTO, ei as u64, bi as u64]),
            )?);
        }
    }

    // Scaling checks on the deterministic Lyapunov route.
    let probe_eta = lyap.eta_fractions[0] / inst.lambda_max;
    let probe_batch = lyap.batches[0];
    let jac = inst
        .reference
        .output_jacobian(&inst.train.xs)
        .map_err(|e| CliError::Failed(format!("jacobian: {e}")))?;
    let lyap_tpv = |eta: f64, batch: usize| -> Result<f64, CliError> {
        let cov = GradientCovariance::new(&jac, &inst.residuals, batch)
            .map_err(|e| CliError::Failed(format!("covariance: {e}")))?;
        let c = stationary_covariance(&inst.h_eff, &cov.sigma_xi, eta)
            .map_err(|e| CliError::Failed(format!("lyapunov: {e}")))?;
        Ok(inst.h_eff.matmul(&c).trace())
    };
    let base = lyap_tpv(probe_eta, probe_batch)?;
    let eta_scaling_ratios = vec![lyap_tpv(2.0 * probe_eta, probe_batch)? / base];
    let batch_scaling_ratios = vec![lyap_tpv(probe_eta, 2 * probe_batch)? / base];

    Ok(SgdLyapunovReport {
        input_dim: lyap.input_dim,
        n_train: lyap.n_train,
        residual_variance: sigma_res2,
        hessian_trace: inst.hessian_trace,
        lambda_max: inst.lambda_max,
        entries,
        eta_scaling_ratios,
        batch_scaling_ratios,
    })
}

pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<String, CliError> {
    ensure_out_dir(out_dir)?;
    write_resolved_config(out_dir, cfg)?;
    let report = compute_report(cfg)?;
    write_json(&out_dir.join("sgd_lyapunov.json"), &report)?;
    let worst = report
        .entries
        .iter()
        .map(|e| {
            (e.empirical_over_lyapunov - 1.0)
                .abs()
                .max((e.lyapunov_over_formula - 1.0).abs())
        })
        .fold(0.0f64, f64::max);
    Ok(format!(
        "sgd-lyapunov: {} settings, worst pairwise deviation {:.1}% -> {}",
        report.entries.len(),
        100.0 * worst,
        out_dir.join("sgd_lyapunov.json").display()
    ))
}
