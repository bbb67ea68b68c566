//! Fixed binary layouts for the protocol messages.
//!
//! Every layout is position-fixed and length-checked, so a message of a
//! given type always has the same size on the wire unless its payload is
//! itself a serialized scheme object (parameters, keys, ciphertexts), whose
//! sizes depend only on public parameters. Nothing here branches on secret
//! data — message sizes are part of the system's observable surface and
//! must not leak anything beyond the parameter set.
//!
//! PROVISION_PARAMS, BOOTSTRAP_DATA, and BOOTSTRAP_RESULT carry scheme
//! envelopes verbatim and need no extra structure; the messages with their
//! own layouts are defined here.

use crate::error::{Error, Result};
use crate::sched::Decision;

use super::aead;
use super::ClientId;

/// Key-agreement public values are 2048-bit, zero-padded big-endian.
pub const EPHEMERAL_LEN: usize = 256;
/// Handshake nonces are 32 bytes.
pub const NONCE_LEN: usize = 32;
/// HELLO payload length: client id, nonce, ephemeral.
pub const HELLO_LEN: usize = 16 + NONCE_LEN + EPHEMERAL_LEN;
/// ATTEST payload length: measurement, ephemeral, transcript MAC.
pub const ATTEST_LEN: usize = 32 + EPHEMERAL_LEN + 32;
/// NOISE_REPORT payload length: two big-endian u32s.
pub const NOISE_REPORT_LEN: usize = 8;

fn wrong_length(what: &str, expected: usize, got: usize) -> Error {
    Error::Protocol {
        code: 10,
        reason: format!("{what} payload must be {expected} bytes, got {got}"),
    }
}

/// HELLO: opens the handshake (client → server).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hello {
    /// The client's stable identifier.
    pub client_id: ClientId,
    /// Fresh anti-replay nonce, folded into the transcript.
    pub client_nonce: [u8; NONCE_LEN],
    /// The client's key-agreement public value.
    pub client_ephemeral: [u8; EPHEMERAL_LEN],
}

impl Hello {
    /// Encodes to the fixed 304-byte layout.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HELLO_LEN);
        out.extend_from_slice(self.client_id.as_bytes());
        out.extend_from_slice(&self.client_nonce);
        out.extend_from_slice(&self.client_ephemeral);
        out
    }

    /// Decodes, insisting on the exact length.
    pub fn decode(payload: &[u8]) -> Result<Self> {
        if payload.len() != HELLO_LEN {
            return Err(wrong_length("HELLO", HELLO_LEN, payload.len()));
        }
        let mut client_id = [0u8; 16];
        client_id.copy_from_slice(&payload[..16]);
        let mut client_nonce = [0u8; NONCE_LEN];
        client_nonce.copy_from_slice(&payload[16..16 + NONCE_LEN]);
        let mut client_ephemeral = [0u8; EPHEMERAL_LEN];
        client_ephemeral.copy_from_slice(&payload[16 + NONCE_LEN..]);
        Ok(Hello {
            client_id: ClientId(client_id),
            client_nonce,
            client_ephemeral,
        })
    }
}

/// ATTEST: the server's handshake answer (server → client).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Attest {
    /// Digest of the enclave's policy constants; the client pins this.
    pub measurement: [u8; 32],
    /// The server's key-agreement public value.
    pub server_ephemeral: [u8; EPHEMERAL_LEN],
    /// Key-confirmation MAC over the whole transcript.
    pub transcript_mac: [u8; 32],
}

impl Attest {
    /// Encodes to the fixed 320-byte layout.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(ATTEST_LEN);
        out.extend_from_slice(&self.measurement);
        out.extend_from_slice(&self.server_ephemeral);
        out.extend_from_slice(&self.transcript_mac);
        out
    }

    /// Decodes, insisting on the exact length.
    pub fn decode(payload: &[u8]) -> Result<Self> {
        if payload.len() != ATTEST_LEN {
            return Err(wrong_length("ATTEST", ATTEST_LEN, payload.len()));
        }
        let mut measurement = [0u8; 32];
        measurement.copy_from_slice(&payload[..32]);
        let mut server_ephemeral = [0u8; EPHEMERAL_LEN];
        server_ephemeral.copy_from_slice(&payload[32..32 + EPHEMERAL_LEN]);
        let mut transcript_mac = [0u8; 32];
        transcript_mac.copy_from_slice(&payload[32 + EPHEMERAL_LEN..]);
        Ok(Attest {
            measurement,
            server_ephemeral,
            transcript_mac,
        })
    }
}

/// PROVISION_KEYS: AEAD nonce followed by the sealed key-pair bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProvisionKeys {
    /// Counter nonce the payload was sealed under.
    pub nonce: [u8; aead::NONCE_LEN],
    /// Sealed concatenation of the secret-key and public-key envelopes.
    pub sealed: Vec<u8>,
}

impl ProvisionKeys {
    /// Encodes as nonce followed by the sealed box.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(aead::NONCE_LEN + self.sealed.len());
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&self.sealed);
        out
    }

    /// Decodes; the sealed part must at least hold a tag.
    pub fn decode(payload: &[u8]) -> Result<Self> {
        if payload.len() < aead::NONCE_LEN + aead::TAG_LEN {
            return Err(Error::Protocol {
                code: 10,
                reason: format!(
                    "PROVISION_KEYS payload of {} bytes is too short",
                    payload.len()
                ),
            });
        }
        let mut nonce = [0u8; aead::NONCE_LEN];
        nonce.copy_from_slice(&payload[..aead::NONCE_LEN]);
        Ok(ProvisionKeys {
            nonce,
            sealed: payload[aead::NONCE_LEN..].to_vec(),
        })
    }
}

/// NOISE_REPORT: the client's current budget estimate and next-op cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseReportMsg {
    /// Estimated remaining budget, bits.
    pub budget: u32,
    /// Estimated cost of the next operation, bits.
    pub next_cost: u32,
}

impl NoiseReportMsg {
    /// Encodes as two big-endian u32s.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(NOISE_REPORT_LEN);
        out.extend_from_slice(&self.budget.to_be_bytes());
        out.extend_from_slice(&self.next_cost.to_be_bytes());
        out
    }

    /// Decodes, insisting on the exact length.
    pub fn decode(payload: &[u8]) -> Result<Self> {
        if payload.len() != NOISE_REPORT_LEN {
            return Err(wrong_length("NOISE_REPORT", NOISE_REPORT_LEN, payload.len()));
        }
        Ok(NoiseReportMsg {
            budget: u32::from_be_bytes(payload[..4].try_into().expect("length checked")),
            next_cost: u32::from_be_bytes(payload[4..].try_into().expect("length checked")),
        })
    }
}

/// POLICY_DECISION: one byte, the admission verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PolicyDecisionMsg {
    /// The verdict.
    pub decision: Decision,
}

impl PolicyDecisionMsg {
    /// Encodes as the decision's single code byte.
    pub fn encode(&self) -> Vec<u8> {
        vec![self.decision.code()]
    }

    /// Decodes, rejecting unknown codes.
    pub fn decode(payload: &[u8]) -> Result<Self> {
        if payload.len() != 1 {
            return Err(wrong_length("POLICY_DECISION", 1, payload.len()));
        }
        let decision = Decision::from_code(payload[0]).ok_or(Error::Protocol {
            code: 10,
            reason: format!("unknown policy decision code {}", payload[0]),
        })?;
        Ok(PolicyDecisionMsg { decision })
    }
}

/// ERROR: numeric code plus a UTF-8 explanation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorMsg {
    /// Stable error code (see the crate error type's wire codes).
    pub code: u32,
    /// Human-readable detail.
    pub detail: String,
}

impl ErrorMsg {
    /// Builds the wire form of a crate error.
    pub fn from_error(err: &Error) -> Self {
        ErrorMsg {
            code: err.wire_code(),
            detail: err.to_string(),
        }
    }

    /// Encodes as big-endian code followed by the UTF-8 detail.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.detail.len());
        out.extend_from_slice(&self.code.to_be_bytes());
        out.extend_from_slice(self.detail.as_bytes());
        out
    }

    /// Decodes; the detail must be valid UTF-8.
    pub fn decode(payload: &[u8]) -> Result<Self> {
        if payload.len() < 4 {
            return Err(Error::Protocol {
                code: 10,
                reason: "ERROR payload shorter than its code field".into(),
            });
        }
        let code = u32::from_be_bytes(payload[..4].try_into().expect("length checked"));
        let detail = String::from_utf8(payload[4..].to_vec()).map_err(|_| Error::Protocol {
            code: 10,
            reason: "ERROR detail is not valid UTF-8".into(),
        })?;
        Ok(ErrorMsg { code, detail })
    }

    /// Turns a received ERROR message back into a crate error.
    pub fn into_error(self) -> Error {
        Error::Protocol {
            code: self.code,
            reason: self.detail,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::RandomStream;

    #[test]
    fn hello_round_trip_and_length() {
        let msg = Hello {
            client_id: ClientId::from_u128(7),
            client_nonce: [3; NONCE_LEN],
            client_ephemeral: [5; EPHEMERAL_LEN],
        };
        let bytes = msg.encode();
        assert_eq!(bytes.len(), 304);
        assert_eq!(Hello::decode(&bytes).unwrap(), msg);
        assert!(Hello::decode(&bytes[..303]).is_err());
    }

    #[test]
    fn attest_round_trip_and_length() {
        let msg = Attest {
            measurement: [1; 32],
            server_ephemeral: [2; EPHEMERAL_LEN],
            transcript_mac: [3; 32],
        };
        let bytes = msg.encode();
        assert_eq!(bytes.len(), 320);
        assert_eq!(Attest::decode(&bytes).unwrap(), msg);
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(Attest::decode(&longer).is_err());
    }

    #[test]
    fn noise_report_round_trip() {
        let msg = NoiseReportMsg { budget: 10, next_cost: 3 };
        let bytes = msg.encode();
        assert_eq!(bytes, vec![0, 0, 0, 10, 0, 0, 0, 3]);
        assert_eq!(NoiseReportMsg::decode(&bytes).unwrap(), msg);
        assert!(NoiseReportMsg::decode(&bytes[..7]).is_err());
    }

    #[test]
    fn policy_decision_round_trip() {
        for code in 0..=2u8 {
            let msg = PolicyDecisionMsg::decode(&[code]).unwrap();
            assert_eq!(msg.encode(), vec![code]);
        }
        assert!(PolicyDecisionMsg::decode(&[3]).is_err());
        assert!(PolicyDecisionMsg::decode(&[]).is_err());
    }

    #[test]
    fn provision_keys_round_trip() {
        let msg = ProvisionKeys {
            nonce: [9; aead::NONCE_LEN],
            sealed: vec![1; 40],
        };
        let bytes = msg.encode();
        assert_eq!(bytes.len(), 52);
        assert_eq!(ProvisionKeys::decode(&bytes).unwrap(), msg);
        assert!(ProvisionKeys::decode(&bytes[..20]).is_err());
    }

    #[test]
    fn error_round_trip_and_mapping() {
        let err = Error::Enclave("session has no keys".into());
        let msg = ErrorMsg::from_error(&err);
        assert_eq!(msg.code, 8);
        let bytes = msg.encode();
        let back = ErrorMsg::decode(&bytes).unwrap();
        assert_eq!(back, msg);
        let revived = back.into_error();
        assert_eq!(revived.wire_code(), 8);
        // Invalid UTF-8 detail is rejected.
        let mut bad = bytes.clone();
        bad.push(0xFF);
        bad.push(0xFE);
        assert!(ErrorMsg::decode(&bad).is_err());
        assert!(ErrorMsg::decode(&[0, 0]).is_err());
    }

    #[test]
    fn fuzzed_decoders_never_panic() {
        let mut rng = RandomStream::from_u64_seed(99);
        for trial in 0..10_000usize {
            let len = trial % 400;
            let mut bytes = vec![0u8; len];
            rng.fill_bytes(&mut bytes);
            let _ = Hello::decode(&bytes);
            let _ = Attest::decode(&bytes);
            let _ = NoiseReportMsg::decode(&bytes);
            let _ = PolicyDecisionMsg::decode(&bytes);
            let _ = ProvisionKeys::decode(&bytes);
            let _ = ErrorMsg::decode(&bytes);
        }
    }
}
