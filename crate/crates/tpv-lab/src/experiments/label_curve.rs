//! `label-noise-curve`: sweep network width on a linear-teacher regression
//! task, comparing the spectral label-noise TPV (σ²·Σ B_ii/s_i², computed
//! through the Gram route so wide networks stay tractable) against the
//! empirical perturb-and-retrain estimate, and correlating TPV with clean
//! test loss across widths.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::datagen::{sample_dataset, TeacherKind, TeacherSpec};
use crate::empirical::{run_label_noise_protocol, LabelNoiseProtocol};
use crate::nn::{init_network, MlpConfig, Network};
use crate::rng::derive_seed;
use crate::theory::{label_noise_spectrum_gram, tpv_label_nonlinear};
use crate::train::{train_mse, TrainConfig};

use super::config::{ExperimentConfig, LabelCurveConfig};
use super::{
    ensure_out_dir, fmt_f64, spearman, write_csv, write_json, write_resolved_config, CliError,
};

const TAG_TEACHER: u64 = 11;
const TAG_INIT: u64 = 12;
const TAG_PROTO: u64 = 13;

pub const CURVE_HEADER: [&str; 9] = [
    "width",
    "sigma",
    "t_base",
    "theoretical_tpv",
    "tpv_train",
    "tpv_test",
    "clean_test_loss",
    "runs_kept",
    "runs_discarded",
];

#[derive(Debug, Clone, Serialize)]
pub struct CurveRow {
    pub width: usize,
    pub sigma: f64,
    /// Σ B_ii/s_i² — σ-independent label-noise sensitivity of the model.
    pub t_base: f64,
    pub theoretical_tpv: f64,
    pub tpv_train: f64,
    pub tpv_test: f64,
    pub clean_test_loss: f64,
    pub runs_kept: usize,
    pub runs_discarded: usize,
}

impl CurveRow {
    fn to_csv_row(&self) -> Vec<String> {
        vec![
            self.width.to_string(),
            fmt_f64(self.sigma),
            fmt_f64(self.t_base),
            fmt_f64(self.theoretical_tpv),
            fmt_f64(self.tpv_train),
            fmt_f64(self.tpv_test),
            fmt_f64(self.clean_test_loss),
            self.runs_kept.to_string(),
            self.runs_discarded.to_string(),
        ]
    }
}

struct WidthResult {
    rows: Vec<CurveRow>,
    logs: Vec<String>,
}

fn run_width(
    width_idx: usize,
    width: usize,
    curve: &LabelCurveConfig,
    base_seed: u64,
) -> WidthResult {
    let mut logs = Vec::new();
    let teacher = TeacherSpec {
        kind: TeacherKind::LinearGaussian,
        input_dim: curve.input_dim,
        seed: derive_seed(base_seed, &[TAG_TEACHER]),
    };
    let train_ds = sample_dataset(&teacher, curve.n_train, 0);
    let test_ds = sample_dataset(&teacher, curve.test_size, 1);

    // Three-layer student: input -> width -> width -> 1, fixed-lr heavy-ball.
    let net_cfg = MlpConfig::new(
        curve.input_dim,
        vec![width, width],
        1,
        derive_seed(base_seed, &[TAG_INIT, width_idx as u64]),
    );
    let ref_cfg = TrainConfig::full_batch(curve.reference_lr, curve.reference_epochs);
    let init = init_network(&net_cfg);
    let reference: Network = match train_mse(&init, &train_ds, &ref_cfg) {
        Ok(t) if !t.diverged => init.with_params(t.final_params),
        Ok(_) => {
            logs.push(format!("width {width}: reference diverged"));
            return WidthResult { rows: vec![], logs };
        }
        Err(e) => {
            logs.push(format!("width {width}: {e}"));
            return WidthResult { rows: vec![], logs };
        }
    };
    let clean_test_loss = reference
        .loss_mse(&test_ds.xs, &test_ds.ys)
        .expect("shapes agree");

    let spectrum = match label_noise_spectrum_gram(&reference, &train_ds.xs, &test_ds.xs, 0.0) {
        Ok(s) => s,
        Err(e) => {
            logs.push(format!("width {width}: spectrum: {e}"));
            return WidthResult { rows: vec![], logs };
        }
    };
    let t_base = tpv_label_nonlinear(&spectrum, 1.0).expect("spectrum positive");

    // Retraining targets: either the teacher labels or the reference's own
    // predictions (the latter removes the common drift of an imperfectly
    // converged reference).
    let retrain_ds = if curve.noise_on_reference_logits {
        let mut ds = train_ds.clone();
        ds.ys = reference
            .batch_forward(&train_ds.xs)
            .expect("shapes agree");
        ds
    } else {
        train_ds.clone()
    };

    let mut rows = Vec::new();
    for (si, &sigma) in curve.sigmas.iter().enumerate() {
        let proto = LabelNoiseProtocol {
            sigma,
            retrain: TrainConfig {
                schedule: crate::train::Schedule::Cosine,
                ..TrainConfig::full_batch(curve.reference_lr, curve.retrain_epochs)
            },
            runs: curve.runs,
            ref_loss_tol: None,
        };
        match run_label_noise_protocol(
            &reference,
            &retrain_ds,
            &test_ds,
            &proto,
            derive_seed(base_seed, &[TAG_PROTO, width_idx as u64, si as u64]),
        ) {
            Ok(report) => rows.push(CurveRow {
                width,
                sigma,
                t_base,
                theoretical_tpv: sigma * sigma * t_base,
                tpv_train: report.tpv_train,
                tpv_test: report.tpv_test,
                clean_test_loss,
                runs_kept: report.runs_kept,
                runs_discarded: report.runs_discarded,
            }),
            Err(e) => logs.push(format!("width {width} sigma {sigma}: {e}")),
        }
    }
    WidthResult { rows, logs }
}

#[derive(Debug, Serialize)]
pub struct SigmaSummary {
    /// Spearman rank correlation of empirical test TPV vs clean test loss.
    pub spearman_tpv_test_vs_loss: f64,
    pub spearman_theory_vs_loss: f64,
    /// Adjacent width pairs (sorted ascending) where the value decreased.
    pub theory_decreasing_pairs: usize,
    pub empirical_decreasing_pairs: usize,
    pub width_pairs: usize,
    /// Empirical-test over theoretical TPV, per width (ascending).
    pub test_over_theory_ratios: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct CurveSummary {
    pub widths: Vec<usize>,
    pub by_sigma: BTreeMap<String, SigmaSummary>,
    pub failures: Vec<String>,
}

pub fn compute_rows(cfg: &ExperimentConfig) -> (Vec<CurveRow>, Vec<String>) {
    let curve = &cfg.label_noise_curve;
    let results: Vec<WidthResult> = curve
        .widths
        .par_iter()
        .enumerate()
        .map(|(i, &w)| run_width(i, w, curve, cfg.base_seed))
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        rows.extend(r.rows);
        failures.extend(r.logs);
    }
    (rows, failures)
}

pub fn summarize(cfg: &ExperimentConfig, rows: &[CurveRow], failures: Vec<String>) -> CurveSummary {
    let curve = &cfg.label_noise_curve;
    let mut by_sigma = BTreeMap::new();
    for &sigma in &curve.sigmas {
        let mut per_width: Vec<&CurveRow> = rows.iter().filter(|r| r.sigma == sigma).collect();
        per_width.sort_by_key(|r| r.width);
        if per_width.len() < 2 {
            continue;
        }
        let losses: Vec<f64> = per_width.iter().map(|r| r.clean_test_loss).collect();
        let tpv_test: Vec<f64> = per_width.iter().map(|r| r.tpv_test).collect();
        let theory: Vec<f64> = per_width.iter().map(|r| r.theoretical_tpv).collect();
        let mut theory_dec = 0;
        let mut emp_dec = 0;
        for w in per_width.windows(2) {
            if w[1].theoretical_tpv < w[0].theoretical_tpv {
                theory_dec += 1;
            }
            if w[1].tpv_test < w[0].tpv_test {
                emp_dec += 1;
            }
        }
        by_sigma.insert(
            format!("{sigma}"),
            SigmaSummary {
                spearman_tpv_test_vs_loss: spearman(&tpv_test, &losses),
                spearman_theory_vs_loss: spearman(&theory, &losses),
                theory_decreasing_pairs: theory_dec,
                empirical_decreasing_pairs: emp_dec,
                width_pairs: per_width.len() - 1,
                test_over_theory_ratios: per_width
                    .iter()
                    .map(|r| r.tpv_test / r.theoretical_tpv)
                    .collect(),
            },
        );
    }
    CurveSummary {
        widths: curve.widths.clone(),
        by_sigma,
        failures,
    }
}

pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<String, CliError> {
    ensure_out_dir(out_dir)?;
    write_resolved_config(out_dir, cfg)?;
    let (rows, failures) = compute_rows(cfg);
    if rows.is_empty() {
        return Err(CliError::Failed(format!(
            "label-noise-curve produced no rows: {failures:?}"
        )));
    }
    let csv_rows: Vec<Vec<String>> = rows.iter().map(|r| r.to_csv_row()).collect();
    write_csv(&out_dir.join("label_noise_curve.csv"), &CURVE_HEADER, &csv_rows)?;
    let summary = summarize(cfg, &rows, failures);
    write_json(&out_dir.join("label_noise_curve_summary.json"), &summary)?;
    Ok(format!(
        "label-noise-curve: {} rows over widths {:?} -> {}",
        rows.len(),
        summary.widths,
        out_dir.join("label_noise_curve.csv").display()
    ))
}
