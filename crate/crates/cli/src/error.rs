use thiserror::Error;

/// Failure of a CLI command, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Config could not be read, parsed or validated. `pointer` is a JSON
    /// pointer into the config when the offending field is known.
    #[error("invalid config{}: {message}", pointer.as_deref().map(|p| format!(" at {p}")).unwrap_or_default())]
    Validation {
        pointer: Option<String>,
        message: String,
    },
    /// A computation failed on a valid config.
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn validation(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation {
            pointer: Some(pointer.into()),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
        }
    }

    /// Classifies an engine error raised while evaluating the block at `pointer`.
    pub fn from_core(err: bcross_core::Error, pointer: &str) -> Self {
        if err.is_validation() {
            CliError::validation(pointer, err.to_string())
        } else {
            CliError::Numeric(err.to_string())
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
