//! Crate-wide error type.

/// Errors produced by model construction, solvers, and the CLI plumbing.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state {value} outside the state interval ({lo}, {hi})")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },

    #[error("point (x={x}, m={m}) violates {constraint}")]
    BadPoint {
        x: f64,
        m: f64,
        constraint: &'static str,
    },

    #[error("bracketing failed for {what}: {detail}")]
    Bracketing { what: &'static str, detail: String },

    #[error("quadrature did not converge on [{lo}, {hi}] (last estimate {estimate:e})")]
    Quadrature { lo: f64, hi: f64, estimate: f64 },

    #[error("vector field is not finite at (x={x}, m={m})")]
    NonFiniteField { x: f64, m: f64 },

    #[error("shooting horizon {horizon} too small: {detail}")]
    HorizonTooSmall { horizon: f64, detail: String },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Exit code the CLI maps this error to: 2 for input problems, 3 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. }
            | Error::OutOfDomain { .. }
            | Error::BadPoint { .. }
            | Error::Config(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
