use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config at `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] thetaflow::Error),
}

/// Machine-readable error record written on failure.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub schema_version: u32,
    pub version: &'static str,
    pub error: ErrorBody,
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Io { .. } => 3,
            CliError::Core(_) => 1,
        }
    }

    pub fn record(&self) -> ErrorRecord {
        let (kind, field, message) = match self {
            CliError::Config { field, message } => ("config", Some(field.clone()), message.clone()),
            CliError::Io { .. } => ("io", None, self.to_string()),
            CliError::Core(e) => ("numerical", None, e.to_string()),
        };
        ErrorRecord {
            schema_version: crate::SCHEMA_VERSION,
            version: thetaflow::VERSION,
            error: ErrorBody {
                kind,
                field,
                message,
            },
        }
    }
}
