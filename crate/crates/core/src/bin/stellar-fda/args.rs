use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use stellar_fda::basis::BasisKind;
use stellar_fda::regress::{Method, TargetMode};
use stellar_fda::select::GammaMode;

#[derive(Debug, Parser)]
#[command(
    name = "stellar-fda",
    version,
    about = "Predict stellar parameters from windowed line spectra"
)]
pub struct Cli {
    /// TOML file with default values for any option; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a grid, project it on a basis and report the design matrix.
    Ingest(IngestArgs),
    /// Rotated five-fold evaluation with validated basis size.
    Evaluate(EvaluateArgs),
    /// Fit one model and save it as JSON.
    Fit(FitArgs),
    /// Predict parameters of query spectra with a saved model.
    Predict(PredictArgs),
    /// Residual-bootstrap prediction intervals for query spectra.
    Intervals(IntervalsArgs),
    /// Leave-one-out coverage of bootstrap prediction intervals.
    Coverage(CoverageArgs),
    /// Nearest-spectrum baseline on the evaluation folds.
    Baseline(BaselineArgs),
    /// Write a synthetic grid with a planted linear model.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    /// Manifest CSV with columns model_id,file,t_star,log_rt.
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    /// Directory that manifest file names are relative to [default: the manifest's directory].
    #[arg(long)]
    pub spectra_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    /// fourier or bspline.
    #[arg(long)]
    pub basis: Option<BasisKind>,

    /// lm, robust, ridge or lasso.
    #[arg(long)]
    pub method: Option<Method>,

    /// brut (raw targets) or norm (standardized targets).
    #[arg(long)]
    pub target_mode: Option<TargetMode>,

    /// Comma-separated λ grid for ridge and lasso.
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,

    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args, Clone, Default)]
pub struct SolverArgs {
    /// Huber tuning constant for robust fits [default: 1.345].
    #[arg(long)]
    pub huber_k: Option<f64>,

    /// Iteration cap of robust IRLS and lasso coordinate descent [default: 50 and 100000].
    #[arg(long)]
    pub max_iter: Option<usize>,

    /// Convergence tolerance of robust and lasso fits [default: 1e-8].
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args, Clone)]
pub struct QueryArgs {
    /// Query spectrum file; the file stem is used as model_id. Repeatable.
    #[arg(long = "query")]
    pub queries: Vec<PathBuf>,

    /// CSV with columns model_id,file listing query spectra.
    #[arg(long)]
    pub query_manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub basis: Option<BasisKind>,
    /// Basis size per window.
    #[arg(long)]
    pub p: Option<usize>,
    /// Write the design matrix as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Bases to evaluate, comma-separated [default: fourier].
    #[arg(long = "basis", value_delimiter = ',')]
    pub bases: Option<Vec<BasisKind>>,
    /// Methods to evaluate, comma-separated [default: all four].
    #[arg(long = "method", value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    /// Target modes, comma-separated [default: brut,norm].
    #[arg(long = "target-mode", value_delimiter = ',')]
    pub target_modes: Option<Vec<TargetMode>>,
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Largest basis size tried.
    #[arg(long)]
    pub p_max: Option<usize>,
    /// full or training-fold.
    #[arg(long)]
    pub gamma_mode: Option<GammaMode>,
    /// Skip the nearest-spectrum baseline column.
    #[arg(long)]
    pub no_baseline: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Text table path; the table is always printed to stdout.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub p: Option<usize>,
    /// Seed for the inner λ cross-validation.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model JSON path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub query: QueryArgs,
    /// Predictions CSV path [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IntervalsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub p: Option<usize>,
    #[command(flatten)]
    pub query: QueryArgs,
    /// Intervals have level 1 − alpha.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Bootstrap replicates T.
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Intervals JSON path [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Coverage JSON path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub gamma_mode: Option<GammaMode>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of spectra.
    #[arg(long)]
    pub n: Option<usize>,
    /// Fourier size of the planted coefficient functions.
    #[arg(long)]
    pub true_p: Option<usize>,
    /// Number of line windows, taken from the start of the default list.
    #[arg(long)]
    pub window_count: Option<usize>,
    #[arg(long)]
    pub samples_per_window: Option<usize>,
    /// Noise standard deviations of the two targets, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub noise: Option<Vec<f64>>,
    #[arg(long)]
    pub outlier_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for manifest.csv, spectra/, truth.json and grid.toml.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
