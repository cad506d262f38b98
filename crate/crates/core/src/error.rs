use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The boundary parametrization is degenerate or not a graph where one is needed.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// A certified object could not be constructed with the requested parameters.
    #[error("construction error: {0}")]
    Construction(String),

    /// Evaluation at the singularity of a kernel (or on the boundary itself).
    #[error("singularity: {0}")]
    Singularity(String),

    /// Refinement cap reached before the tolerance was met.
    #[error("no convergence after {levels} levels (last difference {last_diff:e}, best estimate {best:e})")]
    Convergence {
        levels: usize,
        last_diff: f64,
        best: f64,
    },

    /// Malformed experiment or shape configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
