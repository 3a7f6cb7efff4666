use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FeaeError> = std::result::Result<T, E>;

/// Every failure the library can report, grouped so front ends can map them
/// onto coarse exit categories.
#[derive(Debug, Error)]
pub enum FeaeError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at data row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("model format error: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<FeaeError>,
    },
}

/// Coarse failure class used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

impl FeaeError {
    pub fn dim(a: (usize, usize), b: (usize, usize), what: &str) -> Self {
        FeaeError::Dimension(format!("{what}: {}x{} vs {}x{}", a.0, a.1, b.0, b.1))
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FeaeError::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        FeaeError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            FeaeError::Config(_) => ErrorClass::Config,
            FeaeError::Numeric(_) => ErrorClass::Numeric,
            FeaeError::Stage { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }
}
