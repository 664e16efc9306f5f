//! `stability-grid`: train a clean reference per grid cell, perturb it with
//! label noise and stationary SGD noise, and emit one scatter row per
//! (cell, protocol) with train/test TPV and band membership.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::datagen::{sample_dataset, TeacherSpec};
use crate::empirical::{
    run_label_noise_protocol, run_sgd_noise_protocol, stability_gap, LabelNoiseProtocol,
    SgdStationaryProtocol, TpvReport, STABILITY_BAND_HALF_WIDTH,
};
use crate::nn::{init_network, MlpConfig};
use crate::rng::derive_seed;
use crate::train::{train_mse, Schedule, TrainConfig};

use super::config::{ExperimentConfig, StabilityGridConfig};
use super::{ensure_out_dir, fmt_f64, fmt_opt, write_csv, write_json, write_resolved_config, CliError};

const TAG_TEACHER: u64 = 1;
const TAG_REF_INIT: u64 = 2;
const TAG_LABEL: u64 = 3;
const TAG_SGD: u64 = 4;

pub const SCATTER_HEADER: [&str; 13] = [
    "config_id",
    "noise_kind",
    "width",
    "depth",
    "d",
    "n_train",
    "tpv_train",
    "tpv_test",
    "theoretical_tpv",
    "gen_gap",
    "runs_kept",
    "runs_discarded",
    "band_member",
];

/// One scatter point: a configuration crossed with a perturbation protocol.
#[derive(Debug, Clone, Serialize)]
pub struct ScatterRow {
    pub config_id: String,
    pub noise_kind: String,
    pub width: usize,
    pub depth: usize,
    pub d: usize,
    pub n_train: usize,
    pub tpv_train: f64,
    pub tpv_test: f64,
    pub theoretical_tpv: Option<f64>,
    pub gen_gap: f64,
    pub runs_kept: usize,
    pub runs_discarded: usize,
    pub band_member: bool,
}

impl ScatterRow {
    pub fn to_csv_row(&self) -> Vec<String> {
        vec![
            self.config_id.clone(),
            self.noise_kind.clone(),
            self.width.to_string(),
            self.depth.to_string(),
            self.d.to_string(),
            self.n_train.to_string(),
            fmt_f64(self.tpv_train),
            fmt_f64(self.tpv_test),
            fmt_opt(self.theoretical_tpv),
            fmt_f64(self.gen_gap),
            self.runs_kept.to_string(),
            self.runs_discarded.to_string(),
            self.band_member.to_string(),
        ]
    }

    fn from_report(cell: &Cell, noise_kind: &str, report: &TpvReport) -> ScatterRow {
        let gap = stability_gap(report);
        ScatterRow {
            config_id: cell.id(),
            noise_kind: noise_kind.to_string(),
            width: cell.width,
            depth: cell.depth,
            d: cell.d,
            n_train: cell.n_train,
            tpv_train: report.tpv_train,
            tpv_test: report.tpv_test,
            theoretical_tpv: report.theoretical_tpv,
            gen_gap: report.gen_gap,
            runs_kept: report.runs_kept,
            runs_discarded: report.runs_discarded,
            band_member: gap.in_band(STABILITY_BAND_HALF_WIDTH),
        }
    }
}

#[derive(Debug, Clone)]
struct Cell {
    index: usize,
    teacher_idx: usize,
    teacher: TeacherSpec,
    d: usize,
    n_train: usize,
    width: usize,
    depth: usize,
}

impl Cell {
    fn id(&self) -> String {
        format!(
            "{}_d{}_n{}_w{}_depth{}",
            self.teacher.kind.label(),
            self.d,
            self.n_train,
            self.width,
            self.depth
        )
    }
}

fn enumerate_cells(grid: &StabilityGridConfig, base_seed: u64) -> Vec<Cell> {
    let mut cells = Vec::new();
    let mut index = 0;
    for (teacher_idx, &kind) in grid.teachers.iter().enumerate() {
        for &d in &grid.input_dims {
            for &n_train in &grid.train_sizes {
                for &width in &grid.widths {
                    for &depth in &grid.depths {
                        let teacher = TeacherSpec {
                            kind,
                            input_dim: d,
                            seed: derive_seed(
                                base_seed,
                                &[TAG_TEACHER, teacher_idx as u64, d as u64, n_train as u64],
                            ),
                        };
                        cells.push(Cell {
                            index,
                            teacher_idx,
                            teacher,
                            d,
                            n_train,
                            width,
                            depth,
                        });
                        index += 1;
                    }
                }
            }
        }
    }
    cells
}

fn run_cell(
    cell: &Cell,
    grid: &StabilityGridConfig,
    base_seed: u64,
) -> (Vec<ScatterRow>, Vec<String>) {
    let mut rows = Vec::new();
    let mut logs = Vec::new();
    let _ = cell.teacher_idx;

    let train_ds = sample_dataset(&cell.teacher, cell.n_train, 0);
    let test_ds = sample_dataset(&cell.teacher, grid.test_size, 1);

    let hidden = vec![cell.width; cell.depth - 1];
    let net_cfg = MlpConfig::new(
        cell.d,
        hidden,
        1,
        derive_seed(base_seed, &[TAG_REF_INIT, cell.index as u64]),
    );
    let ref_cfg = TrainConfig {
        schedule: Schedule::Cosine,
        ..TrainConfig::full_batch(grid.reference_lr, grid.reference_epochs)
    };
    let init = init_network(&net_cfg);
    let trace = match train_mse(&init, &train_ds, &ref_cfg) {
        Ok(t) => t,
        Err(e) => {
            logs.push(format!("{}: reference training failed: {e}", cell.id()));
            return (rows, logs);
        }
    };
    if trace.diverged {
        logs.push(format!("{}: reference training diverged", cell.id()));
        return (rows, logs);
    }
    let reference = init.with_params(trace.final_params);

    // Label-noise protocol: full-batch retraining from w★, cosine schedule,
    // batch order fixed by construction.
    for (si, &sigma) in grid.label_sigmas.iter().enumerate() {
        let proto = LabelNoiseProtocol {
            sigma,
            retrain: TrainConfig {
                schedule: Schedule::Cosine,
                proximity_gamma: grid.label_proximity_gamma,
                ..TrainConfig::full_batch(grid.reference_lr, grid.retrain_epochs)
            },
            runs: grid.label_runs,
            ref_loss_tol: None,
        };
        match run_label_noise_protocol(
            &reference,
            &train_ds,
            &test_ds,
            &proto,
            derive_seed(base_seed, &[TAG_LABEL, cell.index as u64, si as u64]),
        ) {
            Ok(report) => {
                let kind = if grid.label_sigmas.len() > 1 {
                    format!("label_noise_s{sigma}")
                } else {
                    "label_noise".to_string()
                };
                rows.push(ScatterRow::from_report(cell, &kind, &report));
            }
            Err(e) => logs.push(format!("{}: label protocol sigma={sigma}: {e}", cell.id())),
        }
    }

    for (li, &lr) in grid.sgd_lrs.iter().enumerate() {
        for (bi, &batch) in grid.sgd_batches.iter().enumerate() {
            let proto = SgdStationaryProtocol {
                lr,
                batch,
                momentum: grid.sgd_momentum,
                burn_in: grid.sgd_burn_in,
                snapshot_every: grid.sgd_snapshot_every,
                total_steps: grid.sgd_total_steps,
            };
            match run_sgd_noise_protocol(
                &reference,
                &train_ds,
                &test_ds,
                &proto,
                derive_seed(
                    base_seed,
                    &[TAG_SGD, cell.index as u64, li as u64, bi as u64],
                ),
            ) {
                Ok(report) => {
                    let kind = if grid.sgd_lrs.len() * grid.sgd_batches.len() > 1 {
                        format!("sgd_noise_lr{lr}_b{batch}")
                    } else {
                        "sgd_noise".to_string()
                    };
                    rows.push(ScatterRow::from_report(cell, &kind, &report));
                }
                Err(e) => logs.push(format!("{}: sgd protocol lr={lr} b={batch}: {e}", cell.id())),
            }
        }
    }

    (rows, logs)
}

#[derive(Debug, Serialize)]
pub struct BandStats {
    pub points: usize,
    pub in_band: usize,
    pub outside: usize,
    pub fraction_outside: f64,
}

#[derive(Debug, Serialize)]
pub struct StabilitySummary {
    pub cells: usize,
    pub rows: usize,
    pub by_train_size: BTreeMap<usize, BandStats>,
    pub failures: Vec<String>,
}

pub fn compute_rows(cfg: &ExperimentConfig) -> (Vec<ScatterRow>, Vec<String>, usize) {
    let grid = &cfg.stability_grid;
    let cells = enumerate_cells(grid, cfg.base_seed);
    let n_cells = cells.len();
    let results: Vec<(Vec<ScatterRow>, Vec<String>)> = cells
        .par_iter()
        .map(|cell| run_cell(cell, grid, cfg.base_seed))
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (cell_rows, logs) in results {
        rows.extend(cell_rows);
        failures.extend(logs);
    }
    (rows, failures, n_cells)
}

pub fn summarize(rows: &[ScatterRow], failures: Vec<String>, cells: usize) -> StabilitySummary {
    let mut by_train_size: BTreeMap<usize, BandStats> = BTreeMap::new();
    for row in rows {
        let entry = by_train_size.entry(row.n_train).or_insert(BandStats {
            points: 0,
            in_band: 0,
            outside: 0,
            fraction_outside: 0.0,
        });
        entry.points += 1;
        if row.band_member {
            entry.in_band += 1;
        } else {
            entry.outside += 1;
        }
    }
    for stats in by_train_size.values_mut() {
        stats.fraction_outside = stats.outside as f64 / stats.points.max(1) as f64;
    }
    StabilitySummary {
        cells,
        rows: rows.len(),
        by_train_size,
        failures,
    }
}

pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<String, CliError> {
    ensure_out_dir(out_dir)?;
    write_resolved_config(out_dir, cfg)?;
    let (rows, failures, cells) = compute_rows(cfg);
    let csv_rows: Vec<Vec<String>> = rows.iter().map(|r| r.to_csv_row()).collect();
    write_csv(&out_dir.join("stability_grid.csv"), &SCATTER_HEADER, &csv_rows)?;
    let summary = summarize(&rows, failures, cells);
    write_json(&out_dir.join("stability_grid_summary.json"), &summary)?;
    let line = format!(
        "stability-grid: {} cells, {} rows, {} failures -> {}",
        summary.cells,
        summary.rows,
        summary.failures.len(),
        out_dir.join("stability_grid.csv").display()
    );
    Ok(line)
}
