use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    MalformedInput(String),

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("insufficient data: need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("degenerate context: every candidate token has zero probability")]
    DegenerateContext,

    #[error("degenerate weights: all particle weights are zero")]
    DegenerateWeights,

    #[error("state space of {size} clones exceeds the enumeration limit {limit}")]
    StateSpaceTooLarge { size: f64, limit: usize },

    #[error("search exhausted: {0}")]
    ExhaustedSearch(String),

    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("refusing to overwrite {} (pass --force)", .0.display())]
    WouldOverwrite(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MalformedInput(_) => "malformed_input",
            Error::InvalidSequence(_) => "invalid_sequence",
            Error::Config { .. } => "config",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::DegenerateContext => "degenerate_context",
            Error::DegenerateWeights => "degenerate_weights",
            Error::StateSpaceTooLarge { .. } => "state_space_too_large",
            Error::ExhaustedSearch(_) => "exhausted_search",
            Error::Parse { .. } => "parse",
            Error::WouldOverwrite(_) => "would_overwrite",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
