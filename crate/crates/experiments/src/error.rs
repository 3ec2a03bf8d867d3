use dlr_core::DlrError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    /// Invalid or unreadable configuration; `field` names the offending key.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("numerical failure: {0}")]
    Numerical(#[from] DlrError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl ExperimentError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, ExperimentError>;
