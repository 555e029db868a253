use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by configuration loading, the numeric operations, and
/// artifact handling.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("mask contains no positive pixels")]
    NoWater,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("no resource rate configured for activity `{0}`")]
    MissingActivityRate(&'static str),

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("unknown scenario id {0} (expected 1 or 2)")]
    UnknownScenario(u8),

    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("artifact verification failed: {0}")]
    VerifyMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl SimError {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        SimError::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
