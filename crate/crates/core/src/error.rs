use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate observable: eigenvalue gap {gap:e} below {threshold:e}")]
    DegenerateObservable { gap: f64, threshold: f64 },

    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    /// A jump was requested from a state whose intensity is (numerically) zero.
    #[error("impossible jump: intensity {mu:e} below guard {guard:e}")]
    ImpossibleJump { mu: f64, guard: f64 },

    #[error("internal consistency violated: {0}")]
    InternalConsistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
