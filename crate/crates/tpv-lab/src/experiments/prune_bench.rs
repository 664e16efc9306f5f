//! `prune-bench`: iterative global pruning of a small Gaussian-mixture
//! classifier under every criterion, over several paired seeds, with raw
//! and averaged trajectories. Comparative by design: the interesting output
//! is criterion-vs-criterion, not absolute accuracy.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::datagen::sample_gaussian_mixture;
use crate::nn::{init_network, MlpConfig, Network};
use crate::pruning::{iterative_global_prune, Criterion, PruneTrajectory};
use crate::rng::derive_seed;
use crate::train::{train_mse, TrainConfig};

use super::config::{ExperimentConfig, PruneBenchConfig};
use super::{ensure_out_dir, fmt_f64, write_csv, write_json, write_resolved_config, CliError};

const TAG_DATA: u64 = 41;
const TAG_INIT: u64 = 42;
const TAG_PRUNE: u64 = 43;

pub const TRAJECTORY_HEADER: [&str; 7] = [
    "iteration",
    "sparsity",
    "params_remaining",
    "macs_fraction",
    "accuracy",
    "criterion",
    "seed",
];

pub const BENCH_CRITERIA: [Criterion; 5] = [
    Criterion::Jbr,
    Criterion::Jc,
    Criterion::L1,
    Criterion::Taylor,
    Criterion::Random,
];

#[derive(Debug, Serialize)]
pub struct PruneBenchSummary {
    /// Mean endpoint accuracy per criterion over seeds.
    pub endpoint_accuracy_mean: BTreeMap<String, f64>,
    /// Per-seed endpoint accuracies per criterion (seed-aligned).
    pub endpoint_accuracy_per_seed: BTreeMap<String, Vec<f64>>,
    pub train_accuracies: Vec<f64>,
    pub layer_collapses: Vec<String>,
}

/// Train one classifier per seed, check the accuracy gate, and prune it
/// under every criterion. Returns (seed, trained-accuracy, trajectories).
pub fn run_seed(
    bench: &PruneBenchConfig,
    base_seed: u64,
    seed_idx: usize,
) -> Result<(f64, Vec<PruneTrajectory>), CliError> {
    let data_seed = derive_seed(base_seed, &[TAG_DATA, seed_idx as u64]);
    let train = sample_gaussian_mixture(
        bench.classes,
        bench.input_dim,
        bench.n_train,
        bench.mean_scale,
        data_seed,
        0,
    );
    let eval = sample_gaussian_mixture(
        bench.classes,
        bench.input_dim,
        bench.n_eval,
        bench.mean_scale,
        data_seed,
        1,
    );

    let init = init_network(&MlpConfig::new(
        bench.input_dim,
        vec![bench.width],
        bench.classes,
        derive_seed(base_seed, &[TAG_INIT, seed_idx as u64]),
    ));
    let train_ds = crate::datagen::Dataset {
        xs: train.xs.clone(),
        ys: train.ys.scale(bench.target_scale),
        teacher: crate::datagen::TeacherSpec {
            kind: crate::datagen::TeacherKind::LinearGaussian,
            input_dim: bench.input_dim,
            seed: data_seed,
        },
        noise_sigma: 0.0,
    };
    let trace = train_mse(
        &init,
        &train_ds,
        &TrainConfig::full_batch(bench.train_lr, bench.train_epochs),
    )
    .map_err(|e| CliError::Failed(format!("seed {seed_idx}: training: {e}")))?;
    if trace.diverged {
        return Err(CliError::Failed(format!("seed {seed_idx}: training diverged")));
    }
    let net: Network = init.with_params(trace.final_params);

    let train_acc = accuracy(&net, &train.xs, &train.labels);
    if train_acc < bench.min_train_accuracy {
        return Err(CliError::Failed(format!(
            "seed {seed_idx}: train accuracy {train_acc:.3} below gate {}",
            bench.min_train_accuracy
        )));
    }

    let mut trajectories = Vec::new();
    for criterion in BENCH_CRITERIA {
        let traj = iterative_global_prune(
            &net,
            &train.xs,
            &train.ys,
            &eval.xs,
            &eval.labels,
            criterion,
            bench.target_sparsity,
            bench.iterations,
            bench.confidence_tau,
            derive_seed(base_seed, &[TAG_PRUNE, seed_idx as u64]),
        )
        .map_err(|e| {
            CliError::Failed(format!(
                "seed {seed_idx} criterion {}: {e}",
                criterion.label()
            ))
        })?;
        trajectories.push(traj);
    }
    Ok((train_acc, trajectories))
}

fn accuracy(net: &Network, xs: &crate::linalg::Matrix, labels: &[usize]) -> f64 {
    let logits = net.batch_forward(xs).expect("shapes agree");
    let hits = labels
        .iter()
        .enumerate()
        .filter(|(i, &label)| crate::pruning::argmax_row(logits.row(*i)) == label)
        .count();
    hits as f64 / labels.len() as f64
}

pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<String, CliError> {
    ensure_out_dir(out_dir)?;
    write_resolved_config(out_dir, cfg)?;
    let bench = &cfg.prune_bench;

    let results: Vec<Result<(f64, Vec<PruneTrajectory>), CliError>> = (0..bench.seeds)
        .into_par_iter()
        .map(|s| run_seed(bench, cfg.base_seed, s))
        .collect();

    let mut csv_rows = Vec::new();
    let mut endpoint: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut train_accuracies = Vec::new();
    let mut layer_collapses = Vec::new();
    for (seed_idx, result) in results.into_iter().enumerate() {
        let (train_acc, trajectories) = result?;
        train_accuracies.push(train_acc);
        for traj in &trajectories {
            let name = traj.criterion.label().to_string();
            if let Some(iter) = traj.layer_collapse {
                layer_collapses.push(format!("seed {seed_idx} {name}: iteration {iter}"));
            }
            for point in &traj.points {
                csv_rows.push(vec![
                    point.iteration.to_string(),
                    fmt_f64(point.sparsity),
                    point.params_remaining.to_string(),
                    fmt_f64(point.macs_fraction),
                    fmt_f64(point.accuracy),
                    name.clone(),
                    seed_idx.to_string(),
                ]);
            }
            let last = traj.points.last().expect("trajectory nonempty");
            endpoint.entry(name).or_default().push(last.accuracy);
        }
    }

    write_csv(
        &out_dir.join("prune_trajectories.csv"),
        &TRAJECTORY_HEADER,
        &csv_rows,
    )?;
    let endpoint_accuracy_mean = endpoint
        .iter()
        .map(|(k, v)| (k.clone(), v.iter().sum::<f64>() / v.len() as f64))
        .collect();
    let summary = PruneBenchSummary {
        endpoint_accuracy_mean,
        endpoint_accuracy_per_seed: endpoint,
        train_accuracies,
        layer_collapses,
    };
    write_json(&out_dir.join("prune_bench_summary.json"), &summary)?;
    Ok(format!(
        "prune-bench: {} seeds x {} criteria -> {}",
        bench.seeds,
        BENCH_CRITERIA.len(),
        out_dir.join("prune_trajectories.csv").display()
    ))
}
