use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or flag combinations; exit code 2.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] keepaugment::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            _ => "runtime",
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
