use thiserror::Error;

/// Errors produced by the simulator and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Lloyd-Max fixed-point iteration did not reach the requested tolerance.
    #[error("quantizer design did not converge after {iterations} iterations (last residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    /// Shapes of interacting arrays or matrices do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A per-subcarrier matrix was singular where an inverse was required.
    #[error("singular matrix at subcarrier {subcarrier}: {context}")]
    Singular { subcarrier: usize, context: String },

    /// Finite-resolution quantization of an (almost) all-zero signal.
    #[error("degenerate quantizer input: per-antenna variance {variance:.3e} is not positive")]
    DegenerateInput { variance: f64 },

    /// A supplied covariance failed Hermitian/positive-semidefinite validation.
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    /// Aggregating a SINDR table that contains an infinite entry.
    #[error("unbounded rate: SINDR is infinite at subcarrier {subcarrier}, user {user}")]
    UnboundedRate { subcarrier: usize, user: usize },

    /// Configuration value outside its documented domain.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Unknown symbol-distribution tag.
    #[error("unknown symbol distribution: {0}")]
    UnknownDistribution(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
