//! Command-line arguments. Every struct here except the top-level [`Cli`]
//! is also what `run_manifest.json` records, so a manifest replays the run.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use daynmf::{DedupePolicy, Init, NmfConfig, Solver};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "nmf", version, about = "Day-pattern NMF for occupancy count series")]
pub struct Cli {
    /// Directory for all outputs (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic usercount series.
    Synth(SynthArgs),
    /// Ingest and resample a raw series into a days-as-columns matrix.
    Ingest(IngestCmd),
    /// Factorize at one inner dimension and analyze the result.
    Fit(FitCmd),
    /// Fit every k in a range and suggest an elbow.
    Sweep(SweepCmd),
    /// Recompute analysis outputs from a saved factorization.
    Analyze(AnalyzeCmd),
    /// Replay a run from its run_manifest.json.
    Rerun(RerunArgs),
}

/// A reproducible unit of work, as stored in a manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Job {
    Synth(SynthArgs),
    Ingest(IngestCmd),
    Fit(FitCmd),
    Sweep(SweepCmd),
    Analyze(AnalyzeCmd),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    /// Built-in scenario name (`norlin-like`) or path to a scenario JSON file.
    #[arg(long, default_value = "norlin-like")]
    pub scenario: String,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output CSV path, `-` for stdout. Defaults to synth.csv in the output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<String>,

    /// Also write the resolved scenario as JSON to this path.
    #[arg(long)]
    #[serde(skip)]
    pub emit_scenario: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct IngestArgs {
    /// IANA zone that defines local days.
    #[arg(long, default_value = "UTC")]
    pub timezone: String,

    /// How duplicate timestamps collapse: mean, max or first.
    #[arg(long, default_value = "mean")]
    pub dedupe: DedupePolicy,

    /// Read timestamps without an offset as UTC instead of rejecting them.
    #[arg(long)]
    pub assume_utc: bool,

    /// Treat zero-count rows as missing data.
    #[arg(long)]
    pub zeros_as_gaps: bool,

    #[arg(long, default_value = "timestamp")]
    pub timestamp_column: String,

    #[arg(long, default_value = "count")]
    pub count_column: String,

    #[arg(long, default_value = "site")]
    pub site_id: String,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GridArgs {
    /// Grid resolution; must divide the 1440-minute day.
    #[arg(long, default_value_t = 10)]
    pub step_minutes: u32,

    /// Minimum fraction of slots not inside a long gap for a day to be kept.
    #[arg(long, default_value_t = 0.0)]
    pub min_coverage: f64,

    /// Raw gaps longer than this count against coverage. Unlimited if unset.
    #[arg(long)]
    pub max_gap_minutes: Option<i64>,
}

/// Where the data matrix comes from.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SourceArgs {
    /// Raw `timestamp,count` CSV, or `-` for stdin (the default).
    #[arg(long, conflicts_with = "matrix")]
    pub input: Option<String>,

    /// A matrix.csv from an earlier run, used instead of raw input.
    #[arg(long)]
    pub matrix: Option<PathBuf>,

    #[command(flatten)]
    pub ingest: IngestArgs,

    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct NmfArgs {
    /// Inner dimension.
    #[arg(long, default_value_t = 4)]
    pub k: usize,

    /// Divergence: 0 Itakura-Saito, 1 Kullback-Leibler, 2 Frobenius.
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,

    /// Regularization intensity (Frobenius only).
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,

    /// L1 share of the regularization, in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,

    /// multiplicative or coordinate_descent.
    #[arg(long, default_value = "coordinate_descent")]
    pub solver: Solver,

    /// random, nndsvd, nndsvda or nndsvdar.
    #[arg(long, default_value = "nndsvdar")]
    pub init: Init,

    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,

    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl NmfArgs {
    pub fn config(&self) -> NmfConfig {
        NmfConfig {
            k: self.k,
            beta: self.beta,
            alpha: self.alpha,
            rho: self.rho,
            solver: self.solver,
            init: self.init,
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct IngestCmd {
    /// Raw `timestamp,count` CSV, or `-` for stdin.
    #[arg(long, default_value = "-")]
    pub input: String,

    #[command(flatten)]
    pub ingest: IngestArgs,

    #[command(flatten)]
    pub grid: GridArgs,

    /// Write SVG plots of the series and the daily overlay.
    #[arg(long)]
    pub plots: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitCmd {
    #[command(flatten)]
    pub source: SourceArgs,

    #[command(flatten)]
    pub nmf: NmfArgs,

    /// Fraction of a component's peak that counts as active.
    #[arg(long, default_value_t = daynmf::analysis::DEFAULT_ACTIVE_FRACTION)]
    pub active_fraction: f64,

    /// Write SVG plots of the data, components and weighted activations.
    #[arg(long)]
    pub plots: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepCmd {
    #[command(flatten)]
    pub source: SourceArgs,

    #[command(flatten)]
    pub nmf: NmfArgs,

    #[arg(long, default_value_t = 1)]
    pub kmin: usize,

    #[arg(long, default_value_t = 8)]
    pub kmax: usize,

    /// Write an SVG plot of MSE against k.
    #[arg(long)]
    pub plots: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AnalyzeCmd {
    /// Directory holding W.csv, H.csv, fit.json and matrix.csv from `fit`.
    #[arg(long)]
    pub factorization: PathBuf,

    /// Data matrix to use instead of the one in the factorization directory.
    #[arg(long)]
    pub matrix: Option<PathBuf>,

    #[arg(long, default_value_t = daynmf::analysis::DEFAULT_ACTIVE_FRACTION)]
    pub active_fraction: f64,

    /// Write SVG plots of the components and weighted activations.
    #[arg(long)]
    pub plots: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    /// A run_manifest.json written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,

    /// Replace the recorded raw input, e.g. when the original was stdin.
    #[arg(long)]
    pub input: Option<String>,
}
