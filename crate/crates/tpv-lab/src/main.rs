//! Command-line surface: configuration-driven experiment commands emitting
//! CSV data, JSON reports, and resolved-config snapshots.
//!
//! Exit codes: 0 success, 1 protocol/check failure, 2 config errors.

use std::path::PathBuf;
use std::process::ExitCode;

use tpv_lab::experiments::{
    config::ExperimentConfig, gradcheck, label_curve, prune_bench, quant, sgd_lyapunov,
    stability, CliError,
};

const USAGE: &str = "tpv-lab — prediction-variance laboratory for small ReLU networks

USAGE:
    tpv-lab <COMMAND> [--config PATH] [--out DIR] [--seed N] [--jobs N] [--full]

COMMANDS:
    stability-grid      train/test TPV scatter across the synthetic grid
    label-noise-curve   spectral vs empirical label-noise TPV over widths
    sgd-lyapunov        empirical / Lyapunov / closed-form SGD TPV comparison
    quant-tpv           uniform-perturbation TPV vs the delta^2/12 formula
    prune-bench         pruning-criterion comparison on a synthetic classifier
    gradcheck           finite-difference Jacobian and gradient verification

FLAGS:
    --config PATH   JSON experiment config (defaults are desk-scale)
    --out DIR       output directory (default: out/<command>)
    --seed N        override the base seed
    --jobs N        worker threads for the parallel job pool
    --full          full-scale grids (hours of runtime)
";

struct Cli {
    command: String,
    config_path: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
    jobs: Option<usize>,
    full: bool,
}

fn parse_args(args: &[String]) -> Result<Cli, CliError> {
    if args.is_empty() {
        return Err(CliError::Config("missing command".into()));
    }
    let mut cli = Cli {
        command: args[0].clone(),
        config_path: None,
        out_dir: None,
        seed: None,
        jobs: None,
        full: false,
    };
    let mut i = 1;
    while i < args.len() {
        let flag = args[i].clone();
        let take_value = |i: &mut usize| -> Result<String, CliError> {
            *i += 1;
            args.get(*i)
                .cloned()
                .ok_or_else(|| CliError::Config(format!("{flag} needs a value")))
        };
        match args[i].as_str() {
            "--config" => cli.config_path = Some(PathBuf::from(take_value(&mut i)?)),
            "--out" => cli.out_dir = Some(PathBuf::from(take_value(&mut i)?)),
            "--seed" => {
                cli.seed = Some(take_value(&mut i)?.parse().map_err(|e| {
                    CliError::Config(format!("--seed must be an unsigned integer: {e}"))
                })?)
            }
            "--jobs" => {
                cli.jobs = Some(take_value(&mut i)?.parse().map_err(|e| {
                    CliError::Config(format!("--jobs must be a positive integer: {e}"))
                })?)
            }
            "--full" => cli.full = true,
            other => return Err(CliError::Config(format!("unknown flag {other}"))),
        }
        i += 1;
    }
    Ok(cli)
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("parsing {}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if cli.full {
        cfg.apply_full_scale();
    }
    if let Some(seed) = cli.seed {
        cfg.base_seed = seed;
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<String, CliError> {
    let cfg = load_config(cli)?;
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let out_dir = cli
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(&cli.command));
    match cli.command.as_str() {
        "stability-grid" => stability::run(&cfg, &out_dir),
        "label-noise-curve" => label_curve::run(&cfg, &out_dir),
        "sgd-lyapunov" => sgd_lyapunov::run(&cfg, &out_dir),
        "quant-tpv" => quant::run(&cfg, &out_dir),
        "prune-bench" => prune_bench::run(&cfg, &out_dir),
        "gradcheck" => gradcheck::run(&cfg, &out_dir),
        other => Err(CliError::Config(format!(
            "unknown command {other}\n\n{USAGE}"
        ))),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() {
        print!("{USAGE}");
        return ExitCode::from(2);
    }
    if args.iter().any(|a| a == "--help" || a == "-h") {
        print!("{USAGE}");
        return ExitCode::SUCCESS;
    }
    let cli = match parse_args(&args) {
        Ok(cli) => cli,
        Err(e) => {
            eprintln!("{e}\n\n{USAGE}");
            return ExitCode::from(2);
        }
    };
    let started = std::time::Instant::now();
    match dispatch(&cli) {
        Ok(line) => {
            println!("{line}");
            eprintln!("elapsed: {:.1}s", started.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
