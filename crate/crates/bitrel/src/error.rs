//! Error type shared by the whole crate.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Caller violated a precondition (bad lengths, bad flag values, ...).
    Usage,
    /// The operating system refused a read or write.
    Io,
    /// A file existed but its contents were not understood.
    Parse,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("stream lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("weighting covers {weights} samples but the stream has {samples}")]
    WeightLengthMismatch { weights: usize, samples: usize },

    #[error("weight sum is zero; the expectation normalizer requires a positive total weight")]
    ZeroWeightSum,

    #[error("weight at index {index} is {value}; weights must be finite and non-negative")]
    InvalidWeight { index: usize, value: f64 },

    #[error("window {start}..{end} is empty or exceeds the stream length {len}")]
    InvalidWindow { start: usize, end: usize, len: usize },

    #[error("a score matrix needs at least 2 nodes, got {got}")]
    TooFewNodes { got: usize },

    #[error("matrix dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("no finite samples to estimate a density from")]
    NoSamples,

    #[error("invalid density grid: lo={lo}, hi={hi}, gridpoints={gridpoints}")]
    InvalidGrid { lo: f64, hi: f64, gridpoints: usize },

    #[error("unknown metric {0:?}; valid metrics: ham, tmt, cls, cos, cov, dep")]
    UnknownMetric(String),

    #[error("unknown statistic {0:?}; valid statistics: tpr, tnr, ppv, npv, acc, bacc, bmi, mcc")]
    UnknownStatistic(String),

    #[error("unknown undefined-score policy {0:?}; valid policies: zero, skip")]
    UnknownPolicy(String),

    #[error("invalid system description: {0}")]
    InvalidSystem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    ParseFile { path: PathBuf, message: String },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::Parse { .. } | Error::ParseFile { .. } => ErrorKind::Parse,
            _ => ErrorKind::Usage,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn parse_file(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::ParseFile {
            path: path.into(),
            message: message.into(),
        }
    }
}
