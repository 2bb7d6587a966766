use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("zero-length heading: head point coincides with center ({cx}, {cy})")]
    ZeroLengthHeading { cx: f64, cy: f64 },

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("no positives: object count must be at least 1")]
    NoPositives,

    #[error("empty mask: at least one supervised cell is required")]
    EmptyMask,

    #[error("missing loss part `{0}`")]
    MissingLossPart(&'static str),

    #[error("unknown class `{0}`")]
    UnknownClass(String),

    #[error("annotation outside image: {0}")]
    OutOfBounds(String),

    #[error("could only place {achieved} of {requested} ships within the retry budget")]
    Placement { achieved: usize, requested: usize },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("tensor format: {0}")]
    TensorFormat(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
