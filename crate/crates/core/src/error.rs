use thiserror::Error;

/// Errors raised across kernel construction, evaluation and certification.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("numerical error: {message} (partial value {partial})")]
    Numerical { message: String, partial: f64 },
    #[error("not conditionally negative definite: projected lambda_max {lambda_max:e} exceeds {tol:e}")]
    NotCnd { lambda_max: f64, tol: f64 },
    #[error("metrizability violation: {0}")]
    Metrizability(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("ill-conditioned instance: {0}")]
    IllConditioned(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("at pair ({i}, {j}): {source}")]
    AtPair {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_pair(self, i: usize, j: usize) -> Error {
        Error::AtPair {
            i,
            j,
            source: Box::new(self),
        }
    }
}
