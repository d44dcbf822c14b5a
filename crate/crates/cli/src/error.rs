// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config key `{key}`: {message}")]
    Validation { key: String, message: String },
    #[error("plot needs column `{column}` in {file}")]
    MissingColumn { column: String, file: String },
    #[error(transparent)]
    Model(#[from] gue_relax::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn validation(key: &str, message: impl Into<String>) -> Self {
        CliError::Validation {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit code: 2 for bad input, 3 for solver or quadrature
    /// failures, 1 for everything else. A threshold breach in `compare` is
    /// not an error and maps to 4 in the binary.
    pub fn exit_code(&self) -> i32 {
        use gue_relax::Error as E;
        match self {
            CliError::Parse(_) | CliError::Validation { .. } => 2,
            CliError::Model(
                E::NoConvergence { .. }
                | E::MassDeficit { .. }
                | E::QuadratureBudgetExceeded { .. }
                | E::DenominatorNearZero(_),
            ) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
