use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::ingest::Unit;

/// Lead-lag estimation between two streams of event timestamps.
#[derive(Debug, Parser)]
#[command(name = "leadlag", version)]
pub struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a bivariate sample and write it as two timestamp files.
    Simulate(SimulateArgs),
    /// Estimate the lead-lag time from two timestamp files.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo RMSE experiment described by a config file.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Builtin scenario name.
    #[arg(long, conflicts_with = "spec_file")]
    pub scenario: Option<String>,

    /// Model description (`key = value` lines); a metadata file written by
    /// this command also works.
    #[arg(long)]
    pub spec_file: Option<PathBuf>,

    /// Window length in seconds.
    #[arg(long = "T")]
    pub window_end: Option<f64>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Lead-lag time in seconds; overrides the scenario or file value.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,

    /// Writes PREFIX.s1.txt, PREFIX.s2.txt and PREFIX.meta.txt.
    #[arg(long)]
    pub out_prefix: PathBuf,

    /// Abort once this many events have been generated.
    #[arg(long)]
    pub event_budget: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Ds,
    Kernel,
    Lepski,
    Cv,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Timestamps of the first series, one per line.
    #[arg(long)]
    pub s1: PathBuf,

    /// Timestamps of the second series.
    #[arg(long)]
    pub s2: PathBuf,

    /// Unit of the timestamps and of --window.
    #[arg(long, default_value = "seconds")]
    pub unit: Unit,

    /// Observation window `start,end`; events in (start, end] are kept and
    /// shifted so that start becomes 0.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,

    /// Collapse repeated timestamps instead of failing.
    #[arg(long)]
    pub dedup: bool,

    #[arg(long, value_enum)]
    pub method: Method,

    /// Bucket width (ds) or bandwidth (kernel), seconds.
    #[arg(long)]
    pub h: Option<f64>,

    /// Search half-range in seconds.
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,

    /// Kernel: tri or uniform.
    #[arg(long, default_value = "tri")]
    pub kernel: String,

    /// Geometric bandwidth grid `a,jmin,gmax` (h = a^-j for jmin <= j <= gmax log T / log a).
    #[arg(long, conflicts_with = "bandwidths")]
    pub grid: Option<String>,

    /// Explicit bandwidth grid, comma-separated. Default 1e-1,...,1e-6.
    #[arg(long)]
    pub bandwidths: Option<String>,

    /// Lepski threshold: `c*loglogT` or a number.
    #[arg(long = "At")]
    pub threshold: Option<String>,

    #[arg(long, default_value_t = 5)]
    pub cv_folds: usize,

    /// nearest or mse.
    #[arg(long, default_value = "nearest")]
    pub cv_loss: String,

    #[arg(long, default_value_t = 0.05)]
    pub tau: f64,

    #[arg(long, default_value_t = 5)]
    pub n_min: usize,

    /// Write the estimated curve as two-column CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment description (`key = value` lines).
    #[arg(long)]
    pub config: PathBuf,

    /// RMSE table, CSV.
    #[arg(long)]
    pub out: PathBuf,

    /// Slope summary, CSV. Defaults to OUT with `.slopes.csv` appended to its stem.
    #[arg(long)]
    pub slopes: Option<PathBuf>,

    /// Override the configured replicate count.
    #[arg(long)]
    pub replicates: Option<usize>,

    /// Override the configured master seed.
    #[arg(long)]
    pub seed: Option<u64>,
}
