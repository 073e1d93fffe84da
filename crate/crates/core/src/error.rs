use std::io;

use thiserror::Error;

/// Errors produced by the editdiff engine.
#[derive(Debug, Error)]
pub enum Error {
    /// A script's total consumption did not match the sequence it was applied to.
    #[error("script consumes {actual} source tokens but the sequence has {expected}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid edit script: {0}")]
    InvalidScript(String),

    #[error("invalid tag sequence: {0}")]
    InvalidTags(String),

    #[error("token id {id} is outside the vocabulary (size {size})")]
    VocabMismatch { id: u32, size: usize },

    #[error("vocabulary hash mismatch: checkpoint has {expected}, vocabulary is {actual}")]
    VocabHashMismatch { expected: String, actual: String },

    #[error("invalid vocabulary: {0}")]
    InvalidVocab(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("corruption produced an empty sequence {attempts} times in a row")]
    CorruptionExhausted { attempts: usize },

    #[error("initialization mode {0} requires a source sequence")]
    MissingSource(&'static str),

    #[error("sequence of length {len} exceeds max_len {max_len}")]
    TooLong { len: usize, max_len: usize },

    #[error("training diverged: non-finite loss {loss} at step {step}")]
    NonFiniteLoss { step: usize, loss: f64 },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("malformed data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
