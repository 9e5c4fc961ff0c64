use thiserror::Error;

use crate::schemes::SchemeId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,

    #[error("field parameters mismatch: {0}")]
    ParamsMismatch(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("unsupported parameters: {0}")]
    UnsupportedParams(String),

    #[error("index {index} out of range for database of {m} records")]
    IndexOutOfRange { index: usize, m: usize },

    #[error("evaluation points must be distinct and nonzero")]
    DegeneratePoints,

    #[error("group parameter search exhausted after {0} candidates")]
    ParamSearchExhausted(u64),

    #[error("missing auxiliary data: {0}")]
    MissingAux(&'static str),

    #[error("message variant does not match scheme {scheme}: {detail}")]
    VariantMismatch { scheme: SchemeId, detail: String },

    #[error("scheme mismatch: {0}")]
    SchemeMismatch(String),

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("group parameters are required for {0}")]
    MissingGroup(SchemeId),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("database file: {0}")]
    DbParse(String),

    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },

    #[error("transport error with {peer}: {source}")]
    Transport {
        peer: String,
        #[source]
        source: std::io::Error,
    },

    #[error("servers disagree on the replicated database")]
    FingerprintMismatch,

    #[error("protocol error (code 0x{code:02x}): {message}")]
    Protocol { code: u8, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
