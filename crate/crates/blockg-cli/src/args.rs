use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "blockg", version, about = "Variable selection with DP mixtures of block g priors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a regression from a CSV file and write posterior summaries.
    Fit(FitArgs),
    /// Bayes factors for a nested pair as one coefficient grows.
    SimulateClp(ClpArgs),
    /// Selection and prediction metrics on simulated block designs.
    SimulateGrid(GridArgs),
    /// Posterior predictive intervals, or repeated train/test splits.
    Predict(PredictArgs),
}

/// Options shared by every command. Unset flags fall back to the config
/// file and then to the command's defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// Total sweeps per chain, burn-in included.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// dp, single-block, all-singletons or fixed-partition.
    #[arg(long)]
    pub variant: Option<String>,
    /// CSV of `column,block` rows for the fixed-partition variant.
    #[arg(long)]
    pub partition_file: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// A positive number, or `n` for the sample size.
    #[arg(long)]
    pub tau2: Option<String>,
    /// Scale predictors to unit standard deviation after centering.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub standardize: Option<bool>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// `key = value` file; keys are flag names without the dashes.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Name of the response column; all other columns are predictors.
    #[arg(long)]
    pub response: Option<String>,
    /// Add squares and pairwise products of the predictors.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub expand_quadratic: Option<bool>,
    /// Also write every kept draw to draws.json (needed by `predict`).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub save_draws: Option<bool>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ClpArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated covariate correlations.
    #[arg(long)]
    pub eta: Option<String>,
    #[arg(long)]
    pub beta2_max: Option<f64>,
    #[arg(long)]
    pub beta2_step: Option<f64>,
    /// Kept draws of a fixed-model chain per grid point (0 skips the chain).
    #[arg(long)]
    pub mcmc_draws: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    /// Coefficients drawn from N(0, 10²).
    #[arg(long)]
    pub large: Option<usize>,
    /// Coefficients drawn from N(0, 1).
    #[arg(long)]
    pub small: Option<usize>,
    #[arg(long)]
    pub eta: Option<String>,
    /// Comma-separated variants to fit on every replicate.
    #[arg(long)]
    pub variants: Option<String>,
    /// Inclusion probability above which a covariate counts as selected.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// draws.json written by `fit --save-draws`.
    #[arg(long)]
    pub draws: Option<PathBuf>,
    /// New rows (prediction mode) or the full data set (with --splits).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Observed response column; enables interval scores.
    #[arg(long)]
    pub response: Option<String>,
    #[arg(long)]
    pub level: Option<f64>,
    /// Number of random train/test splits to run end to end.
    #[arg(long)]
    pub splits: Option<usize>,
    /// Fraction of rows used for training in each split.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Add squares and pairwise products, as for `fit --expand-quadratic`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub expand_quadratic: Option<bool>,
}
