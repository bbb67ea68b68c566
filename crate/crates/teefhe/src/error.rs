//! Crate-wide error type.
//!
//! One enum covers every layer so that cross-layer plumbing (client ↔
//! protocol ↔ scheduler ↔ enclave) does not need conversion boilerplate.
//! Variants carry enough context to act on: deserialization failures report
//! the byte offset, protocol errors carry a stable numeric code that also
//! travels in ERROR frames.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Parameter construction or validation failed.
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    /// An object was used with parameters it was not created under.
    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),

    /// The requested modulus/degree pair has no negacyclic NTT.
    #[error("modulus {q} does not support an NTT of degree {n}")]
    NttUnsupported {
        /// Ring degree requested.
        n: usize,
        /// Offending modulus value.
        q: u64,
    },

    /// Malformed input to a ring or scheme operation.
    #[error("invalid operand: {0}")]
    InvalidOperand(String),

    /// Byte-buffer decoding failed at a known position.
    #[error("deserialization error at offset {offset}: {reason}")]
    Deserialize {
        /// Offset of the first byte that could not be consumed as expected.
        offset: usize,
        /// What was expected there.
        reason: String,
    },

    /// The estimator ran out of budget and no refresh was available.
    #[error("noise budget {budget} cannot cover an operation costing {needed} and no refresh is available")]
    BudgetExhausted {
        /// Remaining budget estimate (bits).
        budget: u32,
        /// Estimated cost of the refused operation (bits).
        needed: u32,
    },

    /// A program could not be parsed.
    #[error("program parse error on line {line}: {reason}")]
    Program {
        /// 1-based source line.
        line: usize,
        /// Human-readable explanation.
        reason: String,
    },

    /// Enclave call rejected (ordering, missing state, bad payload).
    #[error("enclave error: {0}")]
    Enclave(String),

    /// Scheduler/service rejected a request.
    #[error("scheduler error: {0}")]
    Scheduler(String),

    /// Protocol-level failure with a wire error code.
    #[error("protocol error {code}: {reason}")]
    Protocol {
        /// Stable code carried in ERROR frames.
        code: u32,
        /// Human-readable explanation.
        reason: String,
    },

    /// Handshake failed (measurement mismatch, MAC failure, timeout).
    #[error("handshake failed: {0}")]
    Handshake(String),

    /// AEAD open failed: tag mismatch or truncated box.
    #[error("authenticated decryption failed")]
    AeadTag,

    /// Underlying socket/file error.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Numeric code used when this error travels in an ERROR frame.
    pub fn wire_code(&self) -> u32 {
        match self {
            Error::InvalidParameters(_) => 1,
            Error::ParameterMismatch(_) => 2,
            Error::NttUnsupported { .. } => 3,
            Error::InvalidOperand(_) => 4,
            Error::Deserialize { .. } => 5,
            Error::BudgetExhausted { .. } => 6,
            Error::Program { .. } => 7,
            Error::Enclave(_) => 8,
            Error::Scheduler(_) => 9,
            Error::Protocol { code, .. } => *code,
            Error::Handshake(_) => 11,
            Error::AeadTag => 12,
            Error::Io(_) => 13,
        }
    }
}
