use thiserror::Error;

/// Errors raised by the models and the estimator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input lies outside the physical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value violates a type invariant.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("Taylor order {requested} unsupported (maximum {max})")]
    UnsupportedOrder { requested: usize, max: usize },

    /// The Fock basis is too small for the requested coherent amplitude.
    #[error("truncation n_max = {n_max} too small for |alpha|^2 = {mean_photons}")]
    Truncation { n_max: usize, mean_photons: f64 },

    /// Trace duration does not match the configured sweep.
    #[error("calibration error: {0}")]
    Calibration(String),

    /// The initial-guess stage could not extract a fringe pattern.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// The Gauss-Newton normal matrix is rank deficient.
    #[error("singular normal matrix: parameter `{parameter}` is degenerate")]
    Singular { parameter: String },

    /// A downstream operation required a converged fit.
    #[error("fit did not converge: {0}")]
    NotConverged(String),

    #[error("trace I/O error: {0}")]
    Trace(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
