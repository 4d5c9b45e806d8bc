use std::io;

use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid key: {0}")]
    InvalidKey(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("length mismatch: left has {left} bits, right has {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("one-time violation: {0} was already used")]
    OneTimeViolation(String),

    #[error("protocol corruption: {0}")]
    ProtocolCorruption(String),

    #[error("protocol order: {0}")]
    ProtocolOrder(String),

    #[error("destroyed material: {0}")]
    DestroyedMaterial(String),

    #[error("session aborted after corruption")]
    SessionAborted,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("enumeration budget exceeded: needs {needed} bits, budget is {budget}")]
    BudgetExceeded { needed: u32, budget: u32 },

    #[error("unsupported frame: {0}")]
    UnsupportedFrame(String),

    #[error("malformed frame: {0}")]
    MalformedFrame(String),

    #[error("incomplete frame: need {needed} bytes, have {have}")]
    IncompleteFrame { needed: usize, have: usize },

    #[error("delivery failed: {0}")]
    Delivery(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
