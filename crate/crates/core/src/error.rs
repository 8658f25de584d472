use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite coordinate at index {index}")]
    NonFinite { index: usize },

    #[error("empty point: dimension must be at least 1")]
    EmptyPoint,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("schedule index {schedule} does not match state index {state}")]
    ScheduleMismatch { state: usize, schedule: usize },

    #[error("ratio undefined: true gradient is zero")]
    ZeroGradient,

    #[error("problem has no known minimizer; Lyapunov bounds cannot be checked")]
    NotBoundCheckable,

    #[error("insufficient statistics: {runs} runs, at least {required} required")]
    InsufficientStatistics { runs: usize, required: usize },

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("{method} failed at k = {k} in run {run_index}: {source}")]
    Trajectory {
        method: String,
        k: usize,
        run_index: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
