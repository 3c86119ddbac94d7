use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty panel: {0}")]
    EmptyPanel(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    /// Fewer pairwise-complete observations than the configured minimum.
    #[error("insufficient overlap: {found} observations, need {required}")]
    InsufficientOverlap { found: usize, required: usize },

    #[error("no sector modes: {0}")]
    EmptySector(String),

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("insufficient samples: {found}, need {required}")]
    InsufficientSamples { found: usize, required: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
