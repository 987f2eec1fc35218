use thiserror::Error;

/// Errors raised across the simulator and optimizers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical inconsistency: {0}")]
    Numerical(String),

    #[error("ill-conditioned matrix (condition estimate {0:.3e})")]
    IllConditioned(f64),

    #[error("degenerate SINDR for UE {ue}: denominator {denominator:.3e}")]
    DegenerateSindr { ue: usize, denominator: f64 },

    #[error("derivative singularity at entry ({i}, {j}): |correlation| = {value}")]
    DerivativeSingularity { i: usize, j: usize, value: f64 },

    #[error("non-finite gradient at iteration {iteration}")]
    NonFiniteGradient { iteration: usize },

    #[error("degenerate detection gain for UE {ue}: |g| = {magnitude:.3e}")]
    DegenerateGain { ue: usize, magnitude: f64 },

    #[error("inner solve failed at theta = {theta:.6e}: {source}")]
    InnerSolve {
        theta: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("config error at line {line}, field `{field}`: {message}")]
    Config {
        line: usize,
        field: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
