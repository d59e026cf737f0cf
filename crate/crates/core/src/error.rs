use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("path does not exist: {0}")]
    MissingPath(PathBuf),

    #[error("no frames found in {0}")]
    NoFrames(PathBuf),

    #[error("inconsistent frame dimensions: {0}")]
    InconsistentFrames(String),

    #[error("image error: {0}")]
    Image(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged: non-finite loss at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },

    #[error("bitstream crc mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },

    #[error("unsupported bitstream version {0}")]
    UnsupportedVersion(u8),

    #[error("truncated data: {0}")]
    Truncated(String),

    #[error("malformed bitstream: {0}")]
    Malformed(String),

    #[error("curve `{codec}` ({metric}) is not monotone: {detail}")]
    NonMonotone {
        codec: String,
        metric: String,
        detail: String,
    },

    #[error("curve `{codec}` has {found} points, at least {required} are required")]
    TooFewPoints {
        codec: String,
        found: usize,
        required: usize,
    },

    #[error("quality ranges do not overlap enough: intersection {overlap} < {required}")]
    DisjointRange { overlap: f64, required: f64 },

    #[error("degenerate polynomial fit: {0}")]
    DegenerateFit(String),

    #[error("malformed csv row {row}: {detail}")]
    MalformedRow { row: usize, detail: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: &[usize], actual: &[usize]) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_vec(),
            actual: actual.to_vec(),
        }
    }
}
