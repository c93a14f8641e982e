use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the toolkit.
///
/// Variants split into two families: configuration / precondition problems
/// (`is_validation() == true`) and numerical failures of a method that was
/// correctly configured.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },

    #[error("`{field}` out of range: {message} (required horizon {required})")]
    Range {
        field: String,
        message: String,
        required: f64,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("eigenvalue iteration did not converge for matrix {0}")]
    Eigen(String),

    #[error("trajectory diverged at t = {time}: |x| = {norm:e}")]
    Divergence { time: f64, norm: f64 },

    #[error("fixed-point iteration did not reach tol {tol:e} in {iterations} iterations (last residual {last:e})")]
    NonConvergence {
        tol: f64,
        iterations: usize,
        last: f64,
        residuals: Vec<f64>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for misconfiguration and violated preconditions, false for
    /// failures of the numerical method itself.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Invalid { .. }
                | Error::Range { .. }
                | Error::Shape(_)
                | Error::Refused(_)
                | Error::Io(_)
                | Error::Csv(_)
        )
    }
}
