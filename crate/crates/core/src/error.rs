//! Error type shared across the library.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its valid range, or a config file is malformed.
    #[error("configuration error: {0}")]
    Config(String),
    /// An operation was invoked outside its documented preconditions.
    #[error("contract violation: {0}")]
    Contract(String),
    /// A bound is undefined for the given parameters (e.g. zero attack margin).
    #[error("undefined bound: {0}")]
    UndefinedBound(String),
    /// The stop-round solver refused to run because its monotonicity
    /// precondition on the attack margin does not hold.
    #[error("refused: {0}")]
    Refused(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
