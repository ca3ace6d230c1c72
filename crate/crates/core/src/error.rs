use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },

    #[error("invalid shape {0:?}: every dimension must be at least 1")]
    InvalidShape((usize, usize, usize)),

    #[error("tensor contains a non-finite value at flat index {0}")]
    NonFinite(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),

    #[error("sampler diverged at step {step} (sigma = {sigma})")]
    Divergence { step: usize, sigma: f64 },

    #[error("calibration failed: {reason}")]
    Calibration {
        reason: String,
        /// The (r, kappa(r)) curve that was scanned.
        kappa_curve: Vec<(f64, f64)>,
    },

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("unsupported channel count {0} for image export (expected 1 or 3)")]
    UnsupportedChannels(usize),

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

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

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::InvalidShape(_) => "invalid_shape",
            Error::NonFinite(_) => "non_finite",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::EmptyDataset => "empty_dataset",
            Error::DegenerateDataset(_) => "degenerate_dataset",
            Error::Divergence { .. } => "divergence",
            Error::Calibration { .. } => "calibration",
            Error::Format { .. } => "format",
            Error::UnsupportedChannels(_) => "unsupported_channels",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
