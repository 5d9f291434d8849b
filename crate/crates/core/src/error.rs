use thiserror::Error;

/// Errors raised by the solver and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MfgError {
    #[error("{what} index {index} out of range (size {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schema error at {location}: {message}")]
    Schema { location: String, message: String },

    #[error("numerically singular system: {0}")]
    Singular(String),

    #[error("irreducibility violated: states {class:?} form a non-communicating class")]
    Reducible { class: Vec<usize> },

    #[error("enumeration cap exceeded: {count} candidates > cap {cap}; use the per-state representation")]
    CapExceeded { count: u128, cap: usize },

    #[error("point is not stationary (residual {residual:e})")]
    NotStationary { residual: f64 },

    #[error("strategy is not the unique optimal strategy at m ({0})")]
    NotUniqueOptimal(String),

    #[error("empty set")]
    EmptySet,
}

pub type Result<T> = std::result::Result<T, MfgError>;
