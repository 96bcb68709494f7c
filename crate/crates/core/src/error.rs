use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong between reading a CSV and reporting an ATE.
#[derive(Debug, Error)]
pub enum Error {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse {value:?} as a number")]
    NonNumeric { row: usize, column: String, value: String },

    #[error("row {row}: {message}")]
    InvalidRecord { row: usize, message: String },

    #[error("invalid cohort: {0}")]
    InvalidCohort(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{model}: no {kind} events to fit")]
    ZeroEvents { model: &'static str, kind: &'static str },

    #[error("{model}: target is constant")]
    ConstantTarget { model: &'static str },

    #[error("{model}: no convergence after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NonConvergence {
        model: &'static str,
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("cox: monotone likelihood, coefficient {index} diverging")]
    MonotoneLikelihood { index: usize },

    #[error("logistic: perfect separation, coefficient {index} diverging")]
    Separation { index: usize },

    #[error("cox: information matrix is singular")]
    SingularInformation,

    #[error("weak instrument at subject {subject}: |pi(1|1,x) - pi(1|0,x)| = {denominator:.3e} below floor {floor:.1e} (x = {covariates:?})")]
    WeakInstrument {
        subject: usize,
        denominator: f64,
        floor: f64,
        covariates: Vec<f64>,
    },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{failed} of {total} replicates failed (limit 5%); first failure: {first}")]
    TooManyFailures { failed: usize, total: usize, first: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn cohort(msg: impl Into<String>) -> Self {
        Error::InvalidCohort(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for failures in the input data (as opposed to fitting or estimation).
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv(_)
                | Error::MissingColumn(_)
                | Error::NonNumeric { .. }
                | Error::InvalidRecord { .. }
                | Error::InvalidCohort(_)
        )
    }
}
