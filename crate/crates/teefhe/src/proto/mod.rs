//! Framed TCP protocol between evaluation clients and the refresh server.
//!
//! The protocol stack has four small layers:
//! - [`frame`]: length-prefixed message frames over any `Read`/`Write`
//!   transport.
//! - [`messages`]: fixed binary layouts for each message type.
//! - [`aead`]: authenticated encryption for key provisioning.
//! - [`handshake`]: the attestation-style key agreement that pins the
//!   enclave measurement and derives the session key.

pub mod aead;
pub mod frame;
pub mod handshake;
pub mod messages;

pub use frame::{encode_frame, read_frame, write_frame, Frame};
pub use handshake::{handshake_client, handshake_server};

/// A 16-byte client identifier carried in every handshake.
///
/// Identifiers are opaque: the server treats them as map keys and never
/// interprets the bytes. Display renders the value as a decimal integer so
/// logs and CSV reports stay compact.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct ClientId(pub [u8; 16]);

impl ClientId {
    /// Builds an identifier from an integer, for tests and demos.
    pub fn from_u128(value: u128) -> Self {
        ClientId(value.to_be_bytes())
    }

    /// The raw bytes.
    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl std::fmt::Display for ClientId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", u128::from_be_bytes(self.0))
    }
}
