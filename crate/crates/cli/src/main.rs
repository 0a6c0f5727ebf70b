//! `nirom`: generate shallow-water snapshots, decompose them with adaptive
//! randomized DMD, interpolate the modal coefficients and predict fields.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nirom::ErrorKind;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 20_160_917;

#[derive(Parser)]
#[command(name = "nirom", version, about = "Non-intrusive reduced order modelling with adaptive randomized DMD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the shallow-water channel and write h, u, v snapshot files.
    Generate(WithConfig<GenerateOpts>),
    /// Select a rank per field, fit the DMD model and export its spectrum.
    Decompose(WithConfig<DecomposeOpts>),
    /// Evaluate a model (through its RBF interpolant) at given times.
    Predict(WithConfig<PredictOpts>),
    /// Relative error and correlation between two snapshot files.
    Metrics(WithConfig<MetricsOpts>),
    /// Time randomized against full-SVD DMD on synthetic data.
    Bench(WithConfig<BenchOpts>),
}

#[derive(Args)]
struct WithConfig<T: Args> {
    /// `key = value` file supplying defaults for any flag; a run manifest works.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(flatten)]
    opts: T,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct GenerateOpts {
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub ny: Option<usize>,
    /// Number of stored snapshots.
    #[arg(long)]
    pub snapshots: Option<usize>,
    /// Interval between snapshots, in seconds.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Internal time step in seconds (default: half the CFL limit).
    #[arg(long)]
    pub step_dt: Option<f64>,
    #[arg(long)]
    pub l_max: Option<f64>,
    #[arg(long)]
    pub d_max: Option<f64>,
    #[arg(long)]
    pub f0: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub g: Option<f64>,
    #[arg(long)]
    pub h0: Option<f64>,
    #[arg(long)]
    pub h1: Option<f64>,
    #[arg(long)]
    pub h2: Option<f64>,
    /// Keep dimensional units instead of scaling by the reference values.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub dimensional: Option<bool>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct DecomposeOpts {
    /// Snapshot file(s); each field is decomposed independently.
    #[arg(long = "input", value_name = "FILE")]
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<PathBuf>,
    /// Directory holding h.snap, u.snap and v.snap; decomposes all three.
    #[arg(long)]
    pub fields_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use this rank instead of sweeping.
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub max_rel_error: Option<f64>,
    #[arg(long)]
    pub min_correlation: Option<f64>,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub power_iterations: Option<usize>,
    /// Also fit the coefficient interpolant and store it in the model file.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub fit_rbf: Option<bool>,
    /// `joint` (one surface over mode index and time) or `per-mode`.
    #[arg(long)]
    pub rbf_layout: Option<String>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct PredictOpts {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Comma-separated times, in the model's time unit.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub times: Vec<f64>,
    /// Predict at every training instant.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub at_nodes: Option<bool>,
    /// Snapshot file to compare against; writes local-error CSVs.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Layout used when the model file carries no interpolant.
    #[arg(long)]
    pub rbf_layout: Option<String>,
    /// Grid spacing used for the x column of local-error CSVs.
    #[arg(long)]
    pub dx: Option<f64>,
    /// Grid spacing used for the y column of local-error CSVs.
    #[arg(long)]
    pub dy: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct MetricsOpts {
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub estimate: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct BenchOpts {
    /// Comma-separated `MxN` snapshot sizes.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sizes: Vec<String>,
    /// Comma-separated target ranks.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ranks: Vec<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Timing repetitions; the minimum is reported.
    #[arg(long)]
    pub repeats: Option<usize>,
    /// CSV output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => config::merge(&a.opts, a.config.as_ref()).and_then(commands::generate),
        Command::Decompose(a) => config::merge(&a.opts, a.config.as_ref()).and_then(commands::decompose),
        Command::Predict(a) => config::merge(&a.opts, a.config.as_ref()).and_then(commands::predict),
        Command::Metrics(a) => config::merge(&a.opts, a.config.as_ref()).and_then(commands::metrics),
        Command::Bench(a) => config::merge(&a.opts, a.config.as_ref()).and_then(commands::bench),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numerical => 3,
            })
        }
    }
}
