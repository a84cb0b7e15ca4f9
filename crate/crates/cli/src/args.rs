use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "oobvar", version, about = "Random forest out-of-bag residual variance estimation")]
pub struct Cli {
    /// Worker threads; 0 picks one per core. Never changes numeric output.
    #[arg(long, global = true, env = "OOBVAR_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a forest on a CSV file and write the variance report as JSON.
    Fit(FitArgs),
    /// Consistency sweep over a grid of sample sizes on simulated data.
    Simulate(SimArgs),
    /// Frequency of the estimator orderings over a simulation grid.
    Ordering(SimArgs),
    /// Spread of OOB quantities across forests as the tree count grows.
    Mconv(MconvArgs),
}

#[derive(Debug, Args)]
pub struct ForestArgs {
    /// Number of trees [default: 500 for fit, 300 for simulations].
    #[arg(long)]
    pub trees: Option<usize>,
    /// Candidate features per split [default: ceil(p/3)].
    #[arg(long)]
    pub mtry: Option<usize>,
    /// Leaf budget per tree [default: the subsample size].
    #[arg(long)]
    pub max_leaves: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_leaf: usize,
    /// Draw subsamples with replacement.
    #[arg(long)]
    pub with_replacement: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BootArgs {
    /// Monte Carlo bootstrap replicates; 0 reports only the closed-form correction.
    #[arg(long, default_value_t = 0)]
    pub boot_reps: usize,
    #[arg(long, default_value_t = 0)]
    pub boot_seed: u64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Comma-separated input with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Response column.
    #[arg(long)]
    pub target: String,
    #[command(flatten)]
    pub forest: ForestArgs,
    /// Rows per tree.
    #[arg(long, conflicts_with = "subsample_frac")]
    pub subsample_size: Option<usize>,
    /// Rows per tree as a fraction of n, rounded up [default: 0.632].
    #[arg(long)]
    pub subsample_frac: Option<f64>,
    #[command(flatten)]
    pub boot: BootArgs,
    /// Report destination [default: stdout].
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write the fitted forest as JSON.
    #[arg(long)]
    pub forest_output: Option<PathBuf>,
    /// Also write the OOB weight matrix as `i,j,weight` CSV.
    #[arg(long)]
    pub weights_output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelKind {
    /// m = 0, so Y is pure noise.
    Zero,
    /// 4 sin(2 pi x1) + 2 x2^2 + x3 with two irrelevant covariates.
    Canonical,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Schedule {
    /// a_n = ceil(0.632 n)
    Practical,
    /// a_n = ceil(n^0.45)
    Theory,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "canonical")]
    pub model: ModelKind,
    /// Dimension of the zero model.
    #[arg(long, default_value_t = 5)]
    pub p: usize,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Sample sizes, strictly increasing (comma-separated).
    #[arg(long = "n", value_delimiter = ',', required = true)]
    pub n_grid: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, value_enum, default_value = "practical")]
    pub schedule: Schedule,
    #[command(flatten)]
    pub forest: ForestArgs,
    #[command(flatten)]
    pub boot: BootArgs,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct MconvArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long = "n", default_value_t = 200)]
    pub n: usize,
    /// Tree counts, strictly increasing (comma-separated).
    #[arg(long, value_delimiter = ',', default_values_t = [100, 400])]
    pub m_grid: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    #[arg(long, value_enum, default_value = "practical")]
    pub schedule: Schedule,
    #[arg(long, default_value_t = 0)]
    pub probe_row: usize,
    #[command(flatten)]
    pub forest: ForestArgs,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub output: PathBuf,
}
