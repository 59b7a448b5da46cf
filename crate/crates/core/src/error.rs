use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("wavelengths not strictly increasing in {model_id} at sample {index}")]
    NonMonotone { model_id: String, index: usize },

    #[error("wavelength grid of {model_id} differs from grid of {reference}")]
    GridMismatch { model_id: String, reference: String },

    #[error("duplicate model_id {0}")]
    DuplicateModel(String),

    #[error("unknown model_id {0}")]
    UnknownModel(String),

    #[error("empty window [{lower}, {upper}]")]
    EmptyWindow { lower: f64, upper: f64 },

    #[error("invalid window [{lower}, {upper}]")]
    InvalidWindow { lower: f64, upper: f64 },

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("too few samples: need {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("rank-deficient basis matrix (reciprocal condition {rcond:.3e})")]
    RankDeficient { rcond: f64 },

    #[error("singular system: reciprocal condition estimate {rcond:.3e} with {rows} rows and {columns} columns")]
    Singular { rcond: f64, rows: usize, columns: usize },

    #[error("zero variance in target column {0}")]
    ZeroVariance(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no convergence after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("covariance matrix is singular or not positive definite")]
    SingularGamma,

    #[error("every fit failed over the basis-size grid")]
    AllFitsFailed,

    #[error("{failed} of {total} bootstrap refits failed")]
    BootstrapFailures { failed: usize, total: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::RankDeficient { .. }
                | Error::Singular { .. }
                | Error::ZeroVariance(_)
                | Error::NonConvergence { .. }
                | Error::SingularGamma
                | Error::AllFitsFailed
                | Error::BootstrapFailures { .. }
        )
    }
}
