//! Error type shared by all core modules.

use alloc::string::String;
use core::fmt;

/// Errors surfaced by kernel, model, and analysis code.
///
/// Variants map onto the failure classes the CLI turns into exit codes:
/// `InvalidArgument`/`Domain` are caller bugs or bad configs, `Capacity` is
/// an enumeration that would exceed the state cap, `Infeasible` is a state
/// inconsistent with the forward process, and `Training` is a diverged run.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Argument violates a documented precondition.
    InvalidArgument(String),
    /// Input outside the mathematical domain (e.g. t outside [0, 1]).
    Domain(String),
    /// Exact enumeration would exceed the configured state capacity.
    Capacity { requested: usize, limit: usize },
    /// State has zero probability under the forward process.
    Infeasible(String),
    /// Training aborted (NaN loss or sustained divergence).
    Training(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Capacity { requested, limit } => {
                write!(f, "capacity exceeded: {requested} states > limit {limit}")
            }
            Error::Infeasible(msg) => write!(f, "infeasible state: {msg}"),
            Error::Training(msg) => write!(f, "training aborted: {msg}"),
        }
    }
}

#[cfg(any(test, feature = "std"))]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
