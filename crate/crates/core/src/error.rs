use thiserror::Error;

/// Errors raised by the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point lies behind the camera (z = {z})")]
    BehindCamera { z: f64 },

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("not enough candidate views for view {view}: need {needed}, have {available}")]
    NotEnoughViews {
        view: usize,
        needed: usize,
        available: usize,
    },

    #[error("no valid pixels: {0}")]
    NoValidPixels(String),

    #[error("empty point cloud: {0}")]
    EmptyCloud(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {message}")]
    Image { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
