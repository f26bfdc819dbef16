use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed container: {0}")]
    Format(String),

    #[error("length mismatch: header declares {expected} values, data holds {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value in channel {channel} at sample {sample}")]
    NonFinite { channel: usize, sample: usize },

    #[error("markers are not sorted by sample (index {0})")]
    UnsortedMarkers(usize),

    #[error("marker at sample {sample} is outside the recording ({n_samples} samples)")]
    MarkerOutOfRange { sample: usize, n_samples: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("channel selection matched no channels: {0}")]
    EmptySelection(String),

    #[error("period mismatch: expected {expected} samples, detected {detected}")]
    PeriodMismatch { expected: f64, detected: f64 },

    #[error("repetition length varies by more than 10% (median {median}, range {min}..{max})")]
    IrregularRepetitions { median: usize, min: usize, max: usize },

    #[error("zero peaks found")]
    NoPeaks,

    #[error("not enough events: need at least {needed}, found {found}")]
    TooFewEvents { needed: usize, found: usize },

    #[error("zero-variance channel: {0}")]
    ZeroVariance(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("zero usable trials ({dropped} dropped at the recording edges)")]
    NoTrials { dropped: usize },

    #[error("zero noise deviation")]
    ZeroNoiseDeviation,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParam(_) | Error::Config(_) | Error::EmptySelection(_) => 2,
            Error::Numerical(_) | Error::ZeroVariance(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
