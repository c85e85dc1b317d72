//! Error type shared by every module.

use thiserror::Error;

/// Failures raised by the toolkit.
///
/// Variants split into caller mistakes (bad arguments, malformed models) and
/// numerical failures; [`Error::is_numerical`] tells them apart.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("{path}: {message}")]
    InvalidModel { path: String, message: String },

    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),

    #[error("{module}::{operation} on grid (t = {t_final}, n = {n_steps}): non-finite value in {detail}")]
    NonFinite {
        module: &'static str,
        operation: &'static str,
        t_final: f64,
        n_steps: usize,
        detail: String,
    },

    #[error("{module}::{operation} on grid (t = {t_final}, n = {n_steps}): {detail}")]
    Numerical {
        module: &'static str,
        operation: &'static str,
        t_final: f64,
        n_steps: usize,
        detail: String,
    },

    #[error("io error at {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// True for failures of the computation itself rather than of its inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::Numerical { .. })
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn model(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidModel {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
