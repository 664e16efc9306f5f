//! Configuration-driven reproduction of the synthetic experiment grids; the
//! crate's user-facing surface. Each command trains what it needs, runs the
//! perturbation protocols, and emits analysis-ready CSV plus a JSON summary
//! and a resolved-config snapshot next to the outputs.
//!
//! Outputs are byte-reproducible: all parallelism reduces in fixed index
//! order, nothing time-dependent is serialized, and every float is printed
//! through the shortest-roundtrip formatter.

pub mod config;
pub mod gradcheck;
pub mod label_curve;
pub mod prune_bench;
pub mod quant;
pub mod sgd_lyapunov;
pub mod stability;

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

pub use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or invalid config files. Exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// A protocol or check failed while running. Exit code 1.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

/// Shortest-roundtrip float formatting; empty string for missing values.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Write a CSV file with a fixed header and pre-rendered rows.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        let _ = writeln!(out, "{}", row.join(","));
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::Failed(format!("writing {}: {e}", path.display())))
}

/// Serialize a summary or resolved config as pretty JSON with a trailing
/// newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Failed(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::Failed(format!("writing {}: {e}", path.display())))
}

pub fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("creating {}: {e}", dir.display())))
}

/// Snapshot the fully resolved configuration beside the outputs.
pub fn write_resolved_config(dir: &Path, cfg: &ExperimentConfig) -> Result<(), CliError> {
    write_json(&dir.join("resolved_config.json"), cfg)
}

/// Spearman rank correlation with tie-averaged ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = ranks(xs);
    let ry = ranks(ys);
    pearson(&rx, &ry)
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}
