use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Argument outside the domain of the function or law.
    #[error("domain error: {0}")]
    Domain(String),

    /// Gamma function evaluated at a non-positive integer.
    #[error("gamma pole at z = {re} + {im}i")]
    Pole { re: f64, im: f64 },

    /// A Mellin-Barnes contour has no pole-free placement or hits a pole.
    #[error("contour error: {0}")]
    Contour(String),

    /// An iterative or adaptive numerical routine failed to reach its tolerance.
    #[error("no convergence: {what} (estimate {estimate:e}, error {error:e})")]
    NoConvergence {
        what: &'static str,
        estimate: f64,
        error: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("truncated input: needed {needed} bytes, got {got}")]
    Truncated { needed: usize, got: usize },

    #[error("malformed payload: {0}")]
    Malformed(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
