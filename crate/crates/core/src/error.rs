//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model construction, simulation, and quadrature.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("state (D={d}, M={m}) is absorbing; no further events occur")]
    Absorbing { d: i64, m: i64 },

    #[error("point with |d| = 1 is singular for the scaled moments")]
    SingularPoint,

    #[error("trajectory constant is undefined at m = 0")]
    UndefinedConstant,

    #[error("flow started at a fixed corner of the state triangle")]
    FixedPoint,

    #[error("projection radicand {radicand} is negative beyond roundoff; point outside the state triangle")]
    ProjectionDomain { radicand: f64 },

    #[error("projection is nearly singular: m* within {gap:e} of 4q(1-q)")]
    NearSingular { gap: f64 },

    #[error("flow integration left the state triangle at t = {t}: (d, m) = ({d}, {m})")]
    LeftDomain { t: f64, d: f64, m: f64 },

    #[error("coefficients are undefined at m = 1")]
    UndefinedAtOne,

    #[error("step size must be positive, got {0}")]
    InvalidStep(f64),

    #[error("quadrature failed near x = {location}: {reason}")]
    Quadrature { location: f64, reason: String },

    #[error("run truncated after {events} events without reaching a stopping state")]
    TruncatedRun { events: u64 },

    #[error("invalid experiment config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad user input (parameters, states,
    /// configs) as opposed to runtime failures.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams(_) | Error::InvalidState(_) | Error::Config(_)
        )
    }
}
