use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum ZrlError {
    /// A parameter failed validation before any computation started.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The sieve does not reach far enough for the requested quantity.
    #[error("prime table too small: need {needed}, table limit is {limit}")]
    TableTooSmall { needed: f64, limit: u64 },

    /// Evaluation requested at (or within 1e-8 of) the pole s = 1.
    #[error("zeta evaluated at the pole s = 1")]
    ZetaPole,

    /// The accuracy target could not be met within the configured budget.
    #[error("precision target {wanted:e} unreachable, achieved {achieved:e}")]
    Precision { wanted: f64, achieved: f64 },

    /// Adaptive quadrature hit its depth budget; `partial` carries the best
    /// estimate so callers can still report it.
    #[error("quadrature error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    Quadrature {
        estimate: f64,
        tolerance: f64,
        partial_re: f64,
        partial_im: f64,
    },

    /// Power iteration did not converge.
    #[error("no convergence after {0} iterations")]
    NonConvergence(usize),

    /// A combinatorial enumeration would exceed its budget.
    #[error("enumeration budget exceeded: {0}")]
    Budget(String),

    /// A binary cache file is malformed or does not match this version.
    #[error("invalid prime cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ZrlError>;
