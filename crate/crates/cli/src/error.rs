use std::path::{Path, PathBuf};

/// Exit status for argument, file-format and consistency problems.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit status for numerical breakdown during fitting or prediction.
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: line {line}, column '{column}': {message}", path.display())]
    Parse { path: PathBuf, line: u64, column: String, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("model file {}: {message}", path.display())]
    ModelFormat { path: PathBuf, message: String },

    #[error("dataset does not match the model: expected {expected}, found {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error(transparent)]
    Core(#[from] simmoe::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn parse(path: &Path, line: u64, column: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Parse { path: path.to_path_buf(), line, column: column.into(), message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numeric() => EXIT_NUMERIC,
            _ => EXIT_VALIDATION,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
