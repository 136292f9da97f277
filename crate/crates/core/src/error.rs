use thiserror::Error;

/// Errors raised by the spectral pipeline.
///
/// Each variant maps onto a process exit category in the command-line front end
/// (see [`Error::category`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("resource limit exceeded: {what} (cap {cap})")]
    Resource { what: String, cap: usize },

    #[error("small divisor for frequency {frequency:?} at xi = {xi:?}: |divisor| = {value:.3e} < {threshold:.3e}")]
    SmallDivisor {
        frequency: Vec<i64>,
        xi: Vec<f64>,
        value: f64,
        threshold: f64,
    },

    #[error("inconsistent frequency lattice: {0}")]
    Inconsistent(String),

    #[error("zone decomposition failed: {0}")]
    Decomposition(String),

    #[error("gauge chain for zone {zone} did not converge: {detail}")]
    Convergence { zone: String, detail: String },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("truncation not converged: {0}")]
    Truncation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

impl Error {
    /// Stable numeric category, used as the process exit status.
    pub fn category(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Resource { .. } => 3,
            Error::SmallDivisor { .. } => 4,
            Error::Inconsistent(_) => 5,
            Error::Decomposition(_) => 6,
            Error::Convergence { .. } => 7,
            Error::Quadrature(_) | Error::Truncation(_) | Error::Numerical(_) => 8,
            Error::Unsupported(_) => 9,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
