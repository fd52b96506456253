use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("numeric overflow evaluating field {letter} at component {component}")]
    NumericOverflow { letter: usize, component: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("derivative order {order} exceeds supported maximum {max}")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("size guard: {0}")]
    Budget(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("singular system: rank {rank} < {required} after {attempts} attempt(s)")]
    SingularSystem {
        rank: usize,
        required: usize,
        attempts: usize,
    },

    #[error("polynomial fit failure: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
