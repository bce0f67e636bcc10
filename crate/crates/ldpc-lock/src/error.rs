//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: expected length {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("circulant shift {shift} out of range for q = {q}")]
    ShiftOutOfRange { shift: u32, q: usize },

    #[error("malformed code definition: {0}")]
    ParseCode(String),

    #[error("malformed hex string: {0}")]
    InvalidHex(String),

    #[error("unknown code profile '{0}'")]
    UnknownProfile(String),

    #[error("exhaustive census refused: h = {h} exceeds the cap of {max} bits")]
    CensusTooLarge { h: usize, max: usize },

    #[error("attack refused: key space of {bits} bits exceeds the cap of {max} bits")]
    KeySpaceTooLarge { bits: usize, max: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
