//! The TCP client: handshake, provisioning, noise reports, bootstrap
//! shipping, and a frame log for traffic-shape auditing.
//!
//! A [`ServerLink`] is created by [`ServerLink::connect`] (TCP) or
//! [`ServerLink::establish`] (any transport). Creation runs the pinned-
//! measurement handshake; the derived session key then seals the key
//! provisioning payload. The link implements
//! [`RefreshChannel`](super::session::RefreshChannel), so an
//! [`EvalSession`](super::session::EvalSession) can negotiate refreshes
//! through it directly.

use std::io::{Read, Write};
use std::net::TcpStream;

use crate::error::{Error, Result};
use crate::proto::aead;
use crate::proto::frame::{
    read_frame, write_frame, Frame, MSG_BOOTSTRAP_DATA, MSG_BOOTSTRAP_RESULT, MSG_ERROR,
    MSG_NOISE_REPORT, MSG_POLICY_DECISION, MSG_PROVISION_KEYS, MSG_PROVISION_PARAMS,
};
use crate::proto::handshake::handshake_client;
use crate::proto::messages::{ErrorMsg, NoiseReportMsg, PolicyDecisionMsg, ProvisionKeys};
use crate::proto::ClientId;
use crate::ring::RandomStream;
use crate::sched::{Decision, NoiseReport};
use crate::she::{
    serialize_params, serialize_public_key, serialize_secret_key, EncryptionParams, PublicKey,
    SecretKey,
};

use super::session::RefreshChannel;

/// Seals a key pair for provisioning: secret-key envelope followed by
/// public-key envelope, encrypted under the channel key, with the client
/// identifier as associated data. Returns the nonce and the sealed blob.
pub fn seal_key_pair(
    params: &EncryptionParams,
    sk: &SecretKey,
    pk: &PublicKey,
    channel_key: &[u8; aead::KEY_LEN],
    client_id: &[u8; 16],
    counter: u64,
) -> ([u8; aead::NONCE_LEN], Vec<u8>) {
    let mut payload = serialize_secret_key(params, sk).expect("key serializes");
    payload.extend(serialize_public_key(params, pk).expect("key serializes"));
    let nonce = aead::counter_nonce(aead::DIR_CLIENT, counter);
    let sealed = aead::seal(channel_key, &nonce, client_id, &payload);
    (nonce, sealed)
}

/// Which way a logged frame travelled.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Direction {
    /// Client to server.
    Sent,
    /// Server to client.
    Received,
}

/// One entry of the traffic log.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct FrameLogEntry {
    /// Direction of travel.
    pub direction: Direction,
    /// Wire message type byte.
    pub msg_type: u8,
    /// Payload length in bytes (header not counted).
    pub payload_len: usize,
}

/// A connected, attested client link.
pub struct ServerLink<T: Read + Write> {
    transport: T,
    session_key: [u8; 32],
    client_id: ClientId,
    frame_log: Vec<FrameLogEntry>,
}

impl ServerLink<TcpStream> {
    /// Connects over TCP and runs the handshake against the pinned
    /// measurement.
    pub fn connect(
        addr: &str,
        client_id: ClientId,
        expected_measurement: &[u8; 32],
        rng: &mut RandomStream,
    ) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Self::establish(stream, client_id, expected_measurement, rng)
    }
}

impl<T: Read + Write> ServerLink<T> {
    /// Runs the handshake over an existing transport.
    pub fn establish(
        mut transport: T,
        client_id: ClientId,
        expected_measurement: &[u8; 32],
        rng: &mut RandomStream,
    ) -> Result<Self> {
        let session_key =
            handshake_client(&mut transport, client_id, expected_measurement, rng)?;
        Ok(ServerLink {
            transport,
            session_key,
            client_id,
            // the handshake frames have fixed sizes; log them for
            // completeness of the traffic picture
            frame_log: vec![
                FrameLogEntry {
                    direction: Direction::Sent,
                    msg_type: crate::proto::frame::MSG_HELLO,
                    payload_len: crate::proto::messages::HELLO_LEN,
                },
                FrameLogEntry {
                    direction: Direction::Received,
                    msg_type: crate::proto::frame::MSG_ATTEST,
                    payload_len: crate::proto::messages::ATTEST_LEN,
                },
            ],
        })
    }

    /// The client identifier this link authenticated as.
    pub fn client_id(&self) -> ClientId {
        self.client_id
    }

    /// The session key derived by the handshake.
    pub fn session_key(&self) -> &[u8; 32] {
        &self.session_key
    }

    /// Every frame sent or received on this link, in order.
    pub fn frame_log(&self) -> &[FrameLogEntry] {
        &self.frame_log
    }

    fn send(&mut self, msg_type: u8, payload: &[u8]) -> Result<()> {
        write_frame(&mut self.transport, msg_type, payload)?;
        self.frame_log.push(FrameLogEntry {
            direction: Direction::Sent,
            msg_type,
            payload_len: payload.len(),
        });
        Ok(())
    }

    /// Sends an arbitrary frame, bypassing the typed helpers. Crate-test
    /// plumbing for exercising server error paths.
    #[cfg(test)]
    pub(crate) fn send_raw_for_tests(&mut self, msg_type: u8, payload: &[u8]) {
        self.send(msg_type, payload).expect("raw test frame sends");
    }

    fn receive(&mut self) -> Result<Frame> {
        let frame = read_frame(&mut self.transport)?;
        self.frame_log.push(FrameLogEntry {
            direction: Direction::Received,
            msg_type: frame.msg_type,
            payload_len: frame.payload.len(),
        });
        Ok(frame)
    }

    /// Receives a frame of the given type, surfacing server errors.
    fn expect(&mut self, msg_type: u8) -> Result<Frame> {
        let frame = self.receive()?;
        if frame.msg_type == MSG_ERROR {
            return Err(ErrorMsg::decode(&frame.payload)?.into_error());
        }
        if frame.msg_type != msg_type {
            return Err(Error::Protocol {
                code: 10,
                reason: format!(
                    "expected message type {msg_type:#04x}, got {:#04x}",
                    frame.msg_type
                ),
            });
        }
        Ok(frame)
    }

    /// Provisions parameters and the sealed key pair.
    ///
    /// Neither provisioning message is acknowledged on success, so the
    /// call ends with a probe noise report whose decision round-trip
    /// forces any queued provisioning error to surface here and proves
    /// the server is ready.
    pub fn provision(
        &mut self,
        params: &EncryptionParams,
        sk: &SecretKey,
        pk: &PublicKey,
    ) -> Result<()> {
        let params_envelope = serialize_params(params);
        self.send(MSG_PROVISION_PARAMS, &params_envelope)?;
        let (nonce, sealed) =
            seal_key_pair(params, sk, pk, &self.session_key, &self.client_id.0, 0);
        let msg = ProvisionKeys { nonce, sealed };
        self.send(MSG_PROVISION_KEYS, &msg.encode())?;
        // probe: an effectively infinite budget is never admitted
        let decision = self.report_noise(NoiseReport { budget: u32::MAX, next_cost: 0 })?;
        if decision.admitted() {
            return Err(Error::Protocol {
                code: 10,
                reason: "server admitted a fresh-budget probe".into(),
            });
        }
        Ok(())
    }

    /// Sends a noise report and returns the server's admission decision.
    pub fn report_noise(&mut self, report: NoiseReport) -> Result<Decision> {
        let msg = NoiseReportMsg {
            budget: report.budget,
            next_cost: report.next_cost,
        };
        self.send(MSG_NOISE_REPORT, &msg.encode())?;
        let frame = self.expect(MSG_POLICY_DECISION)?;
        Ok(PolicyDecisionMsg::decode(&frame.payload)?.decision)
    }

    /// Ships a serialized ciphertext for refresh and waits for the result.
    pub fn bootstrap(&mut self, ct: &[u8]) -> Result<Vec<u8>> {
        self.send(MSG_BOOTSTRAP_DATA, ct)?;
        let frame = self.expect(MSG_BOOTSTRAP_RESULT)?;
        Ok(frame.payload)
    }
}

impl<T: Read + Write> RefreshChannel for ServerLink<T> {
    fn report(&mut self, report: NoiseReport) -> Result<Decision> {
        self.report_noise(report)
    }

    fn refresh(&mut self, ct: &[u8]) -> Result<Vec<u8>> {
        self.bootstrap(ct)
    }
}
