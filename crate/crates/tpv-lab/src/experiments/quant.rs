//! `quant-tpv`: uniform per-coordinate perturbation Monte Carlo against the
//! δ²/12·Tr(H) closed form, on a linear model (exact at first order) and a
//! small trained MLP that passes the Taylor filter.

use std::path::Path;

use serde::Serialize;

use crate::datagen::{sample_dataset, TeacherKind, TeacherSpec};
use crate::empirical::{run_quantization_protocol, QuantizationProtocol};
use crate::nn::{init_network, MlpConfig, Network};
use crate::rng::derive_seed;
use crate::theory::{hessian_trace_proxy_gram, tpv_quantization};
use crate::train::{train_mse, TrainConfig};

use super::config::ExperimentConfig;
use super::{ensure_out_dir, write_json, write_resolved_config, CliError};

const TAG_TEACHER: u64 = 31;
const TAG_INIT: u64 = 32;
const TAG_PROTO: u64 = 33;

#[derive(Debug, Clone, Serialize)]
pub struct QuantEntry {
    pub model: String,
    pub delta: f64,
    pub tpv_empirical_train: f64,
    pub tpv_empirical_test: f64,
    pub tpv_formula_train: f64,
    pub empirical_over_formula: f64,
    pub runs_kept: usize,
    pub runs_discarded: usize,
}

#[derive(Debug, Serialize)]
pub struct QuantReport {
    pub entries: Vec<QuantEntry>,
}

fn run_model(
    name: &str,
    net: &Network,
    cfg: &ExperimentConfig,
    train: &crate::datagen::Dataset,
    test: &crate::datagen::Dataset,
    entries: &mut Vec<QuantEntry>,
) -> Result<(), CliError> {
    let quant = &cfg.quant;
    let trace = hessian_trace_proxy_gram(net, &train.xs)
        .map_err(|e| CliError::Failed(format!("hessian trace: {e}")))?;
    for (di, &delta) in quant.deltas.iter().enumerate() {
        let proto = QuantizationProtocol {
            delta,
            n_draws: quant.n_draws,
        };
        let report = run_quantization_protocol(
            net,
            train,
            test,
            &proto,
            derive_seed(cfg.base_seed, &[TAG_PROTO, entriestag(name), di as u64]),
        )
        .map_err(|e| CliError::Failed(format!("{name} delta {delta}: {e}")))?;
        let formula = tpv_quantization(delta, trace);
        entries.push(QuantEntry {
            model: name.to_string(),
            delta,
            tpv_empirical_train: report.tpv_train,
            tpv_empirical_test: report.tpv_test,
            tpv_formula_train: formula,
            empirical_over_formula: report.tpv_train / formula,
            runs_kept: report.runs_kept,
            runs_discarded: report.runs_discarded,
        });
    }
    Ok(())
}

fn entriestag(name: &str) -> u64 {
    name.bytes().fold(0u64, |acc, b| acc.wrapping_mul(31).wrapping_add(b as u64))
}

pub fn compute_report(cfg: &ExperimentConfig) -> Result<QuantReport, CliError> {
    let quant = &cfg.quant;
    let teacher = TeacherSpec {
        kind: TeacherKind::LinearGaussian,
        input_dim: quant.input_dim,
        seed: derive_seed(cfg.base_seed, &[TAG_TEACHER]),
    };
    let train = sample_dataset(&teacher, quant.n_train, 0);
    let test = sample_dataset(&teacher, quant.test_size, 1);

    let mut entries = Vec::new();

    let linear = init_network(&MlpConfig::new(
        quant.input_dim,
        vec![],
        1,
        derive_seed(cfg.base_seed, &[TAG_INIT, 0]),
    ));
    run_model("linear", &linear, cfg, &train, &test, &mut entries)?;

    let mlp_init = init_network(&MlpConfig::new(
        quant.input_dim,
        vec![quant.mlp_width],
        1,
        derive_seed(cfg.base_seed, &[TAG_INIT, 1]),
    ));
    let trace = train_mse(
        &mlp_init,
        &train,
        &TrainConfig::full_batch(quant.mlp_train_lr, quant.mlp_train_epochs),
    )
    .map_err(|e| CliError::Failed(format!("mlp training: {e}")))?;
    if trace.diverged {
        return Err(CliError::Failed("mlp reference diverged".into()));
    }
    let mlp = mlp_init.with_params(trace.final_params);
    run_model("mlp", &mlp, cfg, &train, &test, &mut entries)?;

    Ok(QuantReport { entries })
}

pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<String, CliError> {
    ensure_out_dir(out_dir)?;
    write_resolved_config(out_dir, cfg)?;
    let report = compute_report(cfg)?;
    write_json(&out_dir.join("quant_tpv.json"), &report)?;
    let worst = report
        .entries
        .iter()
        .map(|e| (e.empirical_over_formula - 1.0).abs())
        .fold(0.0f64, f64::max);
    Ok(format!(
        "quant-tpv: {} entries, worst deviation from delta^2/12 formula {:.1}% -> {}",
        report.entries.len(),
        100.0 * worst,
        out_dir.join("quant_tpv.json").display()
    ))
}
