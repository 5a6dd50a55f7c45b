//! Error types shared across the evaluation engine.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed JSON or JSONL content, located by file and line.
    #[error("parse error in {file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    /// A loaded record or task violates a store invariant.
    #[error("validation error for {key}: {rule}")]
    Validation { key: String, rule: String },

    /// Missing or inconsistent artifact configuration (e.g. no manifest).
    #[error("configuration error: {0}")]
    Config(String),

    /// Caller-supplied data is malformed (shape mismatch, empty input, NaN).
    #[error("input error: {0}")]
    Input(String),

    /// The requested metric is undefined for the given data.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// An expected evaluation cell or split is absent.
    #[error("missing data: {0}")]
    Missing(String),

    /// The pairwise comparison graph does not connect all methods.
    #[error("comparison graph is disconnected; components: {0}")]
    DisconnectedGraph(String),

    /// Iterative fit did not reach tolerance within the iteration budget.
    #[error("fit did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// Two keyed tables that must align do not.
    #[error("key mismatch: {0}")]
    KeyMismatch(String),

    /// The operation is not defined for the given problem size.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
