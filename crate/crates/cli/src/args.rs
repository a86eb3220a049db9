use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "nstclg",
    about = "Bayesian spatiotemporal modeling for areal panels with censored and missing responses",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads for chain/replicate parallelism (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset (study replicate or station-panel preset).
    Simulate(SimulateArgs),
    /// Run the posterior sampler on a dataset and write chain files.
    Fit(FitArgs),
    /// Posterior predictive draws for future time points from a fit.
    Predict(PredictArgs),
    /// Convergence diagnostics, model criteria, and exploratory statistics.
    Diagnose(DiagnoseArgs),
    /// Run a full simulation study and write its metric tables.
    Study(StudyArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Named design: `table4.1-desk`, `table4.4-desk`, or `beijing`.
    #[arg(long, conflicts_with = "design")]
    pub preset: Option<String>,
    /// Study design JSON (same schema as `study --design`).
    #[arg(long)]
    pub design: Option<PathBuf>,
    /// Which replicate of the design to materialize.
    #[arg(long, default_value_t = 0)]
    pub replicate: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory (data.csv, graph.txt, truth.json, holdout.csv).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    /// Long-format data CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Edge-list graph file.
    #[arg(long)]
    pub graph: PathBuf,
    /// Output directory for chain CSVs, summary, and the run sidecar.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON config with `model` and `run` sections; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named fit preset (`beijing`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Spatial structure: `dagar` or `sar`.
    #[arg(long)]
    pub model: Option<String>,
    /// Temporal AR order.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Interior Gibbs sweeps for the truncated-MVN update.
    #[arg(long)]
    pub sweeps: Option<usize>,
    /// Center every non-constant covariate at zero before fitting.
    #[arg(long, default_value_t = false)]
    pub center_covariates: bool,
    /// Log-transform the response and censoring bounds before fitting.
    #[arg(long, default_value_t = false)]
    pub log_response: bool,
    /// Reserve the final k time points per site as a test split.
    #[arg(long)]
    pub holdout_last: Option<usize>,
    /// Do not prepend an intercept column.
    #[arg(long, default_value_t = false)]
    pub no_intercept: bool,
    /// Persist the imputed censored-cell draws next to each chain.
    #[arg(long, default_value_t = false)]
    pub save_imputed: bool,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Directory written by `fit`.
    #[arg(long)]
    pub run_dir: PathBuf,
    /// Prediction covariates CSV: station, time_index, then the original
    /// covariate columns (pre-centering, no intercept).
    #[arg(long)]
    pub xpred: PathBuf,
    /// Output CSV (site, time_index, mean, median, q025, q975).
    #[arg(long)]
    pub out: PathBuf,
    /// Optional wide CSV with every predictive draw.
    #[arg(long)]
    pub draws_out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Comma-separated 1-based site subset (default: all sites).
    #[arg(long)]
    pub sites: Option<String>,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    /// Directory written by `fit`.
    #[arg(long)]
    pub run_dir: PathBuf,
    /// Output directory for the JSON report and plot-ready CSVs.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub acf_lags: usize,
    #[arg(long, default_value_t = 999)]
    pub moran_permutations: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct StudyArgs {
    /// Named design: `table4.1-desk` or `table4.4-desk`.
    #[arg(long, conflicts_with = "design")]
    pub preset: Option<String>,
    /// Study design JSON.
    #[arg(long)]
    pub design: Option<PathBuf>,
    /// Output directory for the metric tables.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
}
