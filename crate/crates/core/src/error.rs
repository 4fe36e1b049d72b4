use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the library, tagged by the module that owns them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("hilbert: dimension {requested} exceeds the configured cap {cap}")]
    DimensionCap { requested: usize, cap: usize },

    #[error("hilbert: {context}: expected {expected}, found {found}")]
    Shape {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("hilbert: factor index {index} out of range for a space with {factors} factors")]
    FactorIndex { index: usize, factors: usize },

    #[error("{module}: non-finite value encountered in {context}")]
    NonFinite {
        module: &'static str,
        context: &'static str,
    },

    #[error("kernel: correlation is not positive semidefinite (most negative eigenvalue {min_eigenvalue:e})")]
    NotFactorizable { min_eigenvalue: f64 },

    #[error("{module}: {context} needs length {needed}, got {got}")]
    Length {
        module: &'static str,
        context: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("{module}: invalid argument: {message}")]
    InvalidArgument { module: &'static str, message: String },

    #[error("monitor: invalid state: {0}")]
    InvalidState(String),

    #[error("monitor: record of {available} bins is insufficient, {required} bins are required")]
    InsufficientRecord { required: usize, available: usize },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("io error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(module: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidArgument {
            module,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user input (config text, file contents),
    /// as opposed to numeric or runtime failures.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Config(_))
    }
}
