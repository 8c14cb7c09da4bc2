use thiserror::Error;

/// Errors surfaced by parsing, validation, and chain execution.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sampler {sampler} does not apply to {kind} datasets")]
    SamplerMismatch { sampler: String, kind: String },

    #[error("invariant violation at step {step}: {msg}")]
    InvariantViolation { step: u64, msg: String },

    #[error("invalid joint degree matrix: {0}")]
    InvalidBjdm(String),
}

pub type Result<T> = std::result::Result<T, Error>;
