use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:e}")]
    NotPsd { min_eigenvalue: f64 },

    #[error("degenerate sample: row {row} of X is identically zero")]
    DegenerateSample { row: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("eigensolver did not converge after {iterations} sweeps")]
    EigenNonConvergence { iterations: usize },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("iterate left the upper half-plane at iteration {iteration} (Im s = {imag:e}); retry with smaller damping")]
    Instability { iteration: usize, imag: f64 },

    #[error("quadrature did not reach tolerance: estimate {estimate:e}, error bound {abs_error:e}")]
    Quadrature { estimate: f64, abs_error: f64 },

    #[error("index {index} out of range 0..{len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("at grid point {index}: {source}")]
    AtGridPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by user input rather than a numerical failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::InvalidParameter(_)
                | Error::Domain(_)
                | Error::UnsupportedModel(_)
                | Error::NotPsd { .. }
        )
    }
}
