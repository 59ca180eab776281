use thiserror::Error;

/// Errors raised by the engine. Validation problems in whole models are
/// reported through [`crate::model::ValidationReport`] instead.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("impossible observation: {0}")]
    ImpossibleObservation(String),

    #[error("no candidate policies")]
    NoPolicy,

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("script exhausted after {0} responses")]
    ScriptExhausted(usize),

    #[error("provider error: {message}")]
    Provider { message: String, payload: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
