//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the lion library.
#[derive(Debug, Error)]
pub enum LionError {
    /// Invalid configuration (unsupported modality count, inconsistent dims).
    #[error("configuration error: {0}")]
    Config(String),

    /// Operands defined over different algebras or mismatched shapes.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Out-of-range or malformed argument.
    #[error("argument error: {0}")]
    Argument(String),

    /// A documented invariant was violated at runtime.
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// Non-finite values encountered during numeric computation.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Synthetic data generation cannot satisfy the requested config.
    #[error("generation error: {0}")]
    Generation(String),

    /// On-disk container is malformed; the message names the offending field.
    #[error("format error: {0}")]
    Format(String),

    /// Dense materialization exceeds the supported size cap.
    #[error("size error: {0}")]
    Size(String),

    /// Cached artifact no longer matches its inputs.
    #[error("stale cache: {0}")]
    StaleCache(String),

    /// Shared contract between caller and callee was broken (e.g. stale tape).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LionError>;
