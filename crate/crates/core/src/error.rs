//! Error type shared by the filter and protocol layers.

use alloc::string::String;

use crate::AgentId;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors surfaced by filter algebra and the message-passing protocol.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Matrix or vector dimensions do not match what the operation requires.
    Dimension { expected: String, got: String },
    /// An input that must be finite was NaN or infinite.
    NonFinite { what: &'static str },
    /// A matrix that must be positive definite is singular to working
    /// precision; carries the offending (smallest) eigenvalue.
    Singular { eigenvalue: f64 },
    /// A matrix violated a conditioning guard.
    IllConditioned { what: &'static str, cond: f64 },
    /// An argument violated an operation precondition (for example a
    /// non-positive step size).
    InvalidArgument { what: &'static str },
    /// An agent id was not found in the team roster.
    UnknownAgent { uid: AgentId },
    /// A propagation step was requested without a control input for an agent.
    MissingControl { uid: AgentId },
    /// A protocol message did not match the receiver's state (stale step,
    /// wrong counterpart, inconsistent registry).
    Protocol { reason: String },
    /// Malformed bytes on the wire.
    Decode { reason: String },
}

impl core::fmt::Display for Error {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Error::Dimension { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::NonFinite { what } => write!(f, "non-finite value in {what}"),
            Error::Singular { eigenvalue } => write!(
                f,
                "matrix not positive definite: smallest eigenvalue {eigenvalue:e}"
            ),
            Error::IllConditioned { what, cond } => {
                write!(f, "{what} is ill-conditioned: condition number {cond:e}")
            }
            Error::InvalidArgument { what } => write!(f, "invalid argument: {what}"),
            Error::UnknownAgent { uid } => write!(f, "unknown agent uid {uid}"),
            Error::MissingControl { uid } => write!(f, "no control input for agent {uid}"),
            Error::Protocol { reason } => write!(f, "protocol violation: {reason}"),
            Error::Decode { reason } => write!(f, "malformed message: {reason}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn dim_error(expected: impl core::fmt::Display, got: impl core::fmt::Display) -> Error {
    Error::Dimension {
        expected: alloc::format!("{expected}"),
        got: alloc::format!("{got}"),
    }
}
