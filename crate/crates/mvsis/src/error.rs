//! Crate-wide error type.

use thiserror::Error;

/// Errors reported by model construction, simulation, analysis and the harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A coefficient or state evaluated to NaN or an infinity.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// The particle scheme produced a non-finite state.
    #[error("numeric abort at step {step} (particle {particle}): {detail}")]
    NumericAbort {
        /// Index of the step whose update failed.
        step: usize,
        /// Index of the first offending particle.
        particle: usize,
        /// Human-readable description.
        detail: String,
    },
    /// A quantity is not available for the given model.
    #[error("unavailable: {0}")]
    Unavailable(String),
    /// The hypotheses of a closed-form result are not met.
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    /// The experiment configuration could not be parsed or validated.
    #[error("configuration error: {0}")]
    Config(String),
    /// Reading or writing a file failed.
    #[error("i/o error on {path}: {source}")]
    Io {
        /// Path involved in the failed operation.
        path: String,
        /// Underlying error.
        #[source]
        source: std::io::Error,
    },
}

/// Shorthand result type.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

pub(crate) fn ensure_finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(format!("{what} = {value}")))
    }
}
