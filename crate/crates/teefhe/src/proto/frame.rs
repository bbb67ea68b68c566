//! Length-prefixed message frames.
//!
//! Every message on the wire is `len:u32 | type:u8 | payload`, all
//! big-endian, with `len` counting only the payload. Frames larger than
//! 64 MiB are rejected before any allocation; truncation and oversize are
//! connection-fatal, while an unknown message *type* is not a framing error
//! at all — the peer answers with an ERROR frame and keeps the connection.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Maximum payload size: 64 MiB.
pub const MAX_PAYLOAD: u32 = 64 * 1024 * 1024;

/// Handshake request (client → server).
pub const MSG_HELLO: u8 = 0x01;
/// Handshake response with measurement and MAC (server → client).
pub const MSG_ATTEST: u8 = 0x02;
/// Serialized encryption parameters (client → server).
pub const MSG_PROVISION_PARAMS: u8 = 0x03;
/// Sealed key pair (client → server).
pub const MSG_PROVISION_KEYS: u8 = 0x04;
/// Budget/next-cost report (client → server).
pub const MSG_NOISE_REPORT: u8 = 0x10;
/// Admission verdict (server → client).
pub const MSG_POLICY_DECISION: u8 = 0x11;
/// Serialized ciphertext to refresh (client → server).
pub const MSG_BOOTSTRAP_DATA: u8 = 0x12;
/// Refreshed serialized ciphertext (server → client).
pub const MSG_BOOTSTRAP_RESULT: u8 = 0x13;
/// Error code and explanation (either direction).
pub const MSG_ERROR: u8 = 0x7F;

/// One decoded frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    /// Message type byte.
    pub msg_type: u8,
    /// Raw payload.
    pub payload: Vec<u8>,
}

/// Encodes a frame to bytes.
pub fn encode_frame(msg_type: u8, payload: &[u8]) -> Result<Vec<u8>> {
    if payload.len() > MAX_PAYLOAD as usize {
        return Err(Error::Protocol {
            code: 10,
            reason: format!("payload of {} bytes exceeds the frame limit", payload.len()),
        });
    }
    let mut out = Vec::with_capacity(5 + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.push(msg_type);
    out.extend_from_slice(payload);
    Ok(out)
}

/// Writes one frame to the transport.
pub fn write_frame(w: &mut impl Write, msg_type: u8, payload: &[u8]) -> Result<()> {
    let bytes = encode_frame(msg_type, payload)?;
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame from the transport.
///
/// Oversized length prefixes and truncated streams are connection-fatal
/// errors; the caller must drop the connection.
pub fn read_frame(r: &mut impl Read) -> Result<Frame> {
    let mut header = [0u8; 5];
    r.read_exact(&mut header)?;
    let len = u32::from_be_bytes([header[0], header[1], header[2], header[3]]);
    if len > MAX_PAYLOAD {
        return Err(Error::Protocol {
            code: 10,
            reason: format!("declared payload of {len} bytes exceeds the frame limit"),
        });
    }
    let msg_type = header[4];
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload)?;
    Ok(Frame { msg_type, payload })
}
