use std::path::PathBuf;

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter or input violated a documented invariant.
    #[error("invalid input: {0}")]
    Validation(String),
    /// An index or window fell outside the data it was applied to.
    #[error("out of bounds: {0}")]
    Bounds(String),
    /// Two inputs that must agree in shape did not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// The pre-event data carries no signal to fit (all zeros).
    #[error("degenerate OLS denominator: pre-event data is identically zero")]
    DegenerateDenominator,
    /// An asymptotic quantity was requested for a non-stationary fit.
    #[error("non-stationary fit: |phi_hat| = {0} >= 1")]
    NonstationaryFit(f64),
    /// Confidence level outside (0, 1).
    #[error("invalid confidence level {0}, must lie in (0, 1)")]
    InvalidLevel(f64),
    /// A Monte Carlo replication failed.
    #[error("replication {index}: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    /// Not enough replications or observations for a diagnostic.
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    TrainingDiverged { epoch: usize },
    /// A model was applied with a configuration it was not trained for.
    #[error("model/config mismatch: {0}")]
    ModelMismatch(String),
    /// The synthetic control does not cover the requested window.
    #[error("synthetic control does not cover indices {missing:?}")]
    Coverage { missing: Vec<usize> },
    /// Event window deeper than the forecast horizon.
    #[error("window of {d} steps exceeds forecast horizon {horizon}")]
    Horizon { d: usize, horizon: usize },
    /// No usable days to compute a year scale.
    #[error("cannot compute scale: {0}")]
    Scale(String),
    /// MAPE is undefined when an observed value is zero.
    #[error("observed value at index {index} is zero; MAPE undefined")]
    ZeroObserved { index: usize },
    /// A series in a long-format panel is missing a date.
    #[error("series '{series_id}' is missing date {date}")]
    Gap { series_id: String, date: String },
    /// A malformed record in an input file.
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    /// Series in a panel do not share the same date range.
    #[error("inconsistent date ranges: {0}")]
    Range(String),
    /// Occurrences of one event overlap.
    #[error("event '{event}': occurrences starting {first} and {second} overlap")]
    Overlap {
        event: String,
        first: String,
        second: String,
    },
    /// A file could not be opened or read.
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than a failure during
    /// computation. The CLI maps these to exit code 2.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Validation(_)
            | Error::Bounds(_)
            | Error::DimensionMismatch(_)
            | Error::InvalidLevel(_)
            | Error::InsufficientData { .. }
            | Error::ModelMismatch(_)
            | Error::Coverage { .. }
            | Error::Horizon { .. }
            | Error::Gap { .. }
            | Error::Parse { .. }
            | Error::Range(_)
            | Error::Overlap { .. }
            | Error::File { .. } => true,
            Error::Replication { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
