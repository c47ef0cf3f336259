use thiserror::Error;

/// Errors produced by the minar library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Vector/matrix dimensions do not agree.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// An operation requiring a stationary process was given a thinning
    /// matrix with spectral radius >= 1.
    #[error("nonstationary thinning matrix: spectral radius {rho} >= 1")]
    NonStationary { rho: f64 },

    /// A numerical procedure failed to converge or produced invalid values.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The observed series is too short for the requested operation.
    #[error("series too short: need at least {needed} rows, got {actual}")]
    SeriesTooShort { needed: usize, actual: usize },

    /// A likelihood ratio test was requested for a non-nested model pair.
    #[error("models are not nested: {0}")]
    NotNested(String),

    /// Estimation cannot proceed (degenerate data, invalid model).
    #[error("estimation error: {0}")]
    Estimation(String),

    /// Malformed input data (catalog files, series files, configs).
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
