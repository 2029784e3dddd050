//! Experiment harness: configuration, command dispatch, CSV output and run
//! manifests for the photonlink models.

pub mod commands;
pub mod config;
pub mod figures;
pub mod manifest;
pub mod validate;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] photonlink::Error),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration and parameter errors, 3 for failed validation,
    /// 4 for numerical non-convergence, 1 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        use photonlink::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Model(E::NonConvergence { .. } | E::RootNotFound { .. } | E::NotSaturating { .. }) => 4,
            CliError::Model(_) => 2,
            CliError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "validation",
            4 => "non_convergence",
            _ => "io",
        }
    }

    /// One-line JSON error record.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        })
        .to_string()
    }
}
