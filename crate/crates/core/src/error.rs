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

    #[error("missing input: {0}")]
    MissingInput(PathBuf),

    /// Malformed raster header; `key` names the offending header entry.
    #[error("raster format error at `{key}`: {message}")]
    Format { key: String, message: String },

    #[error("raster value count mismatch: expected {expected}, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("rejected feature #{index}: {reason}")]
    RejectedFeature { index: usize, reason: String },

    #[error("malformed network file: {0}")]
    Network(String),

    #[error("rasters are misaligned: {0}")]
    Misaligned(String),

    #[error("point ({x}, {y}) lies outside the grid")]
    OutOfBounds { x: f64, y: f64 },

    #[error("observer cell ({col}, {row}) is nodata")]
    NodataObserver { col: usize, row: usize },

    #[error("path graph has no edges")]
    EmptyGraph,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("category mismatch: {0}")]
    CategoryMismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            key: key.into(),
            message: message.into(),
        }
    }
}
