use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(#[from] opuc_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LabError {
    pub fn config(msg: impl Into<String>) -> Self {
        LabError::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => EXIT_CONFIG,
            LabError::Numerical(_) => EXIT_NUMERICAL,
            LabError::Io { .. } => EXIT_IO,
        }
    }
}

pub type LabResult<T> = Result<T, LabError>;
