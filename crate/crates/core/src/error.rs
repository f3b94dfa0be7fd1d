use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed epoch file header: {0}")]
    MalformedHeader(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value at trial {trial}, channel {channel}, sample {sample}")]
    NonFinite {
        trial: usize,
        channel: usize,
        sample: usize,
    },

    #[error("unknown label code {0}")]
    UnknownLabelCode(u8),

    #[error("invalid time window [{start}, {end}): {reason}")]
    InvalidWindow { start: f64, end: f64, reason: String },

    #[error("degenerate baseline (zero standard deviation) at trial {trial}, channel {channel}")]
    DegenerateBaseline { trial: usize, channel: usize },

    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("epoch has {have} samples but the filter needs more than {need} for edge padding")]
    EpochTooShort { have: usize, need: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no trials of {0}")]
    EmptyClass(String),

    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(String),

    #[error("count vector sums to {sum}, expected {k}")]
    CountMismatch { sum: usize, k: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("class too small: {0}")]
    ClassTooSmall(String),

    #[error("{stage} failed for {unit}: {source}")]
    Stage {
        stage: &'static str,
        unit: String,
        #[source]
        source: Box<Error>,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps an error with the pipeline stage and unit it came from.
    pub fn at(self, stage: &'static str, unit: impl Into<String>) -> Self {
        Error::Stage {
            stage,
            unit: unit.into(),
            source: Box::new(self),
        }
    }
}
