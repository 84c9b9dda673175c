use thiserror::Error;

/// Errors raised by the simulation and verification routines.
///
/// Every variant carries enough context (field name, path id, time) to
/// locate the offending input without rerunning.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("time {t} outside the admissible range [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("non-finite state at t={t} (path {path})")]
    NonFiniteState { path: u64, t: f64 },

    #[error("state left the positive half-line at t={t}: x={x} (path {path})")]
    PositivityViolation { path: u64, t: f64, x: f64 },

    #[error("control {value} at t={t} outside admissible interval [{lo}, {hi}]")]
    Admissibility { t: f64, value: f64, lo: f64, hi: f64 },

    #[error("compensator requested for a path with non-predictable marks")]
    ModeError,

    #[error("sampled paths do not share a grid: {0}")]
    GridMismatch(String),

    #[error("not enough paths: need at least {needed}, got {got}")]
    InsufficientPaths { needed: usize, got: usize },

    #[error("event cap of {cap} reached on path {path}; intensity is exploding")]
    Explosion { path: u64, cap: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { field: field.to_string(), reason: reason.into() }
}
