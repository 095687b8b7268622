use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The capacity LP would exceed the solver's hard variable limit.
    #[error(
        "capacity LP needs {vars} variables, above the limit of {limit}; \
         reduce the type-pool size or supply an explicit rate vector"
    )]
    LpTooLarge { vars: usize, limit: usize },

    #[error("linear program failed: {0}")]
    Solver(String),

    /// A runtime invariant check failed; always a bug.
    #[error("invariant violated at t={time}: {message}")]
    Invariant { time: f64, message: String },

    #[error("i/o: {0}")]
    Io(String),

    #[error("insufficient data: need at least {needed} completed tasks, got {got}")]
    InsufficientData { needed: usize, got: usize },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
