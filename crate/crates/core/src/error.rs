//! Error type shared by the core modules.

use thiserror::Error;

/// Errors surfaced by the numeric core.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A resource guard tripped (table or matrix would be too large).
    #[error("capacity: {0}")]
    Capacity(String),

    /// Invalid configuration or parameters; the message names the failed
    /// constraint.
    #[error("config: {0}")]
    Config(String),

    /// An argument is outside the mathematical domain of the operation.
    #[error("domain: {0}")]
    Domain(String),

    /// A computation produced a non-finite value; the message names the
    /// stage that failed.
    #[error("numeric: {0}")]
    Numeric(String),
}

/// Result alias for core operations.
pub type Result<T> = std::result::Result<T, CoreError>;
