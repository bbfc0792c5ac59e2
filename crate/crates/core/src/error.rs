use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Cholesky factorization failed even after the largest jitter step.
    #[error("covariance of size {size} is ill-conditioned (jitter tried up to {max_jitter:e})")]
    IllConditioned { size: usize, max_jitter: f64 },

    #[error("hyperparameter fitting failed: {0}")]
    FittingFailed(String),

    #[error("{stage} stage fit failed{}: {source}", region.map(|r| format!(" in region {r}")).unwrap_or_default())]
    Stage {
        stage: &'static str,
        region: Option<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("objective evaluation failed at design point {point}: {source}")]
    Evaluation {
        point: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invariant violated: {0}")]
    InvariantViolated(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
