use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Index, ordinal or dimension outside the admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid grid, solver or experiment parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// Non-finite or otherwise unusable input data.
    #[error("data error: {0}")]
    Data(String),

    /// A documented precondition of the method does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Iteration {
            iteration,
            source: Box::new(self),
        }
    }
}
