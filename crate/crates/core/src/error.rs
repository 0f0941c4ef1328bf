use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    #[error("{what} = {value} is not a multiple of the time step {step}")]
    NotGridMultiple {
        what: &'static str,
        value: f64,
        step: f64,
    },

    #[error("time {t} does not fall on a grid node")]
    OffGrid { t: f64 },

    #[error("time {t} is outside [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("path sample {index} is not strictly positive ({value})")]
    NonPositivePath { index: usize, value: f64 },

    #[error("volatility {value} at t = {t} is not strictly positive")]
    NonPositiveVolatility { t: f64, value: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("segment window {found} does not match functional window {expected}")]
    WindowMismatch { expected: f64, found: f64 },

    #[error("expected {expected} brownian increments, found {found}")]
    IncrementCount { expected: usize, found: usize },

    #[error("path does not carry its brownian increments")]
    MissingIncrements,

    #[error("wrong measure: {0}")]
    WrongMeasure(&'static str),

    #[error("{0}")]
    Unsupported(&'static str),
}

impl Error {
    /// Failures that come out of the numerics rather than out of bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonPositiveVolatility { .. } | Error::NonFinite(_)
        )
    }
}
