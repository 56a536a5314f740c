use ndis_core::Error as CoreError;
use thiserror::Error;

/// Exit status for input that could not be parsed or validated.
pub const EXIT_USAGE: i32 = 1;
/// Exit status for violated domain or privacy preconditions.
pub const EXIT_DOMAIN: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("{0}: no data rows")]
    EmptyInput(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Usage(String),

    #[error("invalid JSON input: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e {
                CoreError::InvalidParameter(_)
                | CoreError::DimMismatch { .. }
                | CoreError::ShapeMismatch(_)
                | CoreError::BracketError { .. }
                | CoreError::TooLarge(_) => EXIT_USAGE,
                _ => EXIT_DOMAIN,
            },
            _ => EXIT_USAGE,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
