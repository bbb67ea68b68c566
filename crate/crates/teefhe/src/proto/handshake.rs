//! The attestation-style handshake: pinned measurement, key agreement,
//! transcript confirmation.
//!
//! Order of trust establishment: the client introduces itself (HELLO with a
//! fresh nonce and its key-agreement value), the server answers with its
//! module measurement, its own key-agreement value, and a MAC over the full
//! transcript keyed by the derived session key (ATTEST). The client aborts
//! *before* any secret-dependent computation if the measurement does not
//! match the digest it pins, and aborts on any transcript mismatch — a
//! tampered ephemeral changes the derived key and the MAC check fails.
//!
//! Key agreement is classic finite-field Diffie-Hellman in the 2048-bit
//! MODP group (RFC 3526, group 14) with generator 2 and 256-bit exponents.
//! Public values travel as fixed 256-byte zero-padded big-endian strings,
//! so handshake traffic is the same size for every key and every client.
//! There is no third-party attestation verifier: the measurement digest
//! plays that role, which is exactly the simulation boundary documented by
//! the enclave module.

use std::io::{Read, Write};

use hmac::{Hmac, Mac};
use num_bigint::BigUint;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ring::RandomStream;

use super::frame::{read_frame, write_frame, MSG_ATTEST, MSG_ERROR, MSG_HELLO};
use super::messages::{Attest, ErrorMsg, Hello, EPHEMERAL_LEN, NONCE_LEN};
use super::ClientId;

/// The RFC 3526 2048-bit MODP group modulus, hexadecimal.
const MODP_2048_HEX: &str = "\
FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74\
020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437\
4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED\
EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05\
98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB\
9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B\
E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718\
3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF";

/// The group generator.
const GENERATOR: u32 = 2;

/// Parses the group modulus.
fn group_modulus() -> BigUint {
    BigUint::parse_bytes(MODP_2048_HEX.as_bytes(), 16).expect("valid hex constant")
}

/// Draws a 256-bit exponent with the top bit forced, so exponent size —
/// and therefore exponentiation work — is identical on every run.
fn draw_exponent(rng: &mut RandomStream) -> BigUint {
    let mut bytes = [0u8; 32];
    rng.fill_bytes(&mut bytes);
    bytes[0] |= 0x80;
    BigUint::from_bytes_be(&bytes)
}

/// Left-pads a group element to the fixed 256-byte wire form.
fn pad_element(value: &BigUint) -> [u8; EPHEMERAL_LEN] {
    let bytes = value.to_bytes_be();
    let mut out = [0u8; EPHEMERAL_LEN];
    out[EPHEMERAL_LEN - bytes.len()..].copy_from_slice(&bytes);
    out
}

/// Validates a received public value: must lie in [2, p − 2].
fn checked_element(bytes: &[u8; EPHEMERAL_LEN], p: &BigUint) -> Result<BigUint> {
    let value = BigUint::from_bytes_be(bytes);
    let two = BigUint::from(2u32);
    if value < two || value > p - &two {
        return Err(Error::Handshake(
            "peer key-agreement value outside the valid range".into(),
        ));
    }
    Ok(value)
}

/// The handshake transcript: every public value both sides saw, in order.
fn transcript(
    client_id: &ClientId,
    client_nonce: &[u8; NONCE_LEN],
    client_ephemeral: &[u8; EPHEMERAL_LEN],
    measurement: &[u8; 32],
    server_ephemeral: &[u8; EPHEMERAL_LEN],
) -> Vec<u8> {
    let mut t = Vec::with_capacity(16 + NONCE_LEN + 2 * EPHEMERAL_LEN + 32);
    t.extend_from_slice(client_id.as_bytes());
    t.extend_from_slice(client_nonce);
    t.extend_from_slice(client_ephemeral);
    t.extend_from_slice(measurement);
    t.extend_from_slice(server_ephemeral);
    t
}

/// Derives the 32-byte session key from the shared secret and transcript.
fn derive_session_key(shared: &BigUint, transcript: &[u8]) -> [u8; 32] {
    let transcript_hash: [u8; 32] = Sha256::digest(transcript).into();
    let mut h = Sha256::new();
    h.update(b"teefhe-session-key-v1");
    h.update(pad_element(shared));
    h.update(transcript_hash);
    h.finalize().into()
}

/// Computes the key-confirmation MAC over the transcript.
fn confirm_mac(session_key: &[u8; 32], transcript: &[u8]) -> [u8; 32] {
    let mut mac =
        <Hmac<Sha256> as Mac>::new_from_slice(session_key).expect("hmac accepts any key length");
    mac.update(b"teefhe-attest-confirm-v1");
    mac.update(transcript);
    mac.finalize().into_bytes().into()
}

/// Client side: sends HELLO, verifies ATTEST, derives the session key.
///
/// Aborts with a handshake error — before any key derivation — when the
/// server's measurement differs from `expected_measurement`; aborts on a
/// MAC mismatch, an out-of-range public value, or an unexpected frame. An
/// ERROR frame from the server is surfaced as the error it carries.
pub fn handshake_client<T: Read + Write>(
    transport: &mut T,
    client_id: ClientId,
    expected_measurement: &[u8; 32],
    rng: &mut RandomStream,
) -> Result<[u8; 32]> {
    let p = group_modulus();
    let g = BigUint::from(GENERATOR);
    let x = draw_exponent(rng);
    let mut client_nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut client_nonce);
    let client_ephemeral = pad_element(&g.modpow(&x, &p));

    let hello = Hello { client_id, client_nonce, client_ephemeral };
    write_frame(transport, MSG_HELLO, &hello.encode())?;

    let frame = read_frame(transport)?;
    if frame.msg_type == MSG_ERROR {
        return Err(ErrorMsg::decode(&frame.payload)?.into_error());
    }
    if frame.msg_type != MSG_ATTEST {
        return Err(Error::Handshake(format!(
            "expected ATTEST, got message type {:#04x}",
            frame.msg_type
        )));
    }
    let attest = Attest::decode(&frame.payload)?;

    // Pinned-measurement check comes first: an unexpected module identity
    // aborts before any secret is derived or provisioned.
    if &attest.measurement != expected_measurement {
        return Err(Error::Handshake(
            "server measurement does not match the pinned digest".into(),
        ));
    }

    let server_value = checked_element(&attest.server_ephemeral, &p)?;
    let shared = server_value.modpow(&x, &p);
    let t = transcript(
        &client_id,
        &client_nonce,
        &client_ephemeral,
        &attest.measurement,
        &attest.server_ephemeral,
    );
    let session_key = derive_session_key(&shared, &t);
    let expected_mac = confirm_mac(&session_key, &t);
    // The MAC is 32 bytes of a keyed hash; compare in constant time by
    // folding the difference.
    let diff = expected_mac
        .iter()
        .zip(attest.transcript_mac.iter())
        .fold(0u8, |acc, (a, b)| acc | (a ^ b));
    if diff != 0 {
        return Err(Error::Handshake("transcript MAC mismatch".into()));
    }
    Ok(session_key)
}

/// Server side: reads HELLO, answers ATTEST, derives the session key.
///
/// Returns the session key and the client's claimed identifier.
pub fn handshake_server<T: Read + Write>(
    transport: &mut T,
    measurement: &[u8; 32],
    rng: &mut RandomStream,
) -> Result<([u8; 32], ClientId)> {
    let frame = read_frame(transport)?;
    if frame.msg_type != MSG_HELLO {
        return Err(Error::Handshake(format!(
            "expected HELLO, got message type {:#04x}",
            frame.msg_type
        )));
    }
    let hello = Hello::decode(&frame.payload)?;

    let p = group_modulus();
    let g = BigUint::from(GENERATOR);
    let client_value = checked_element(&hello.client_ephemeral, &p)?;
    let y = draw_exponent(rng);
    let server_ephemeral = pad_element(&g.modpow(&y, &p));
    let shared = client_value.modpow(&y, &p);

    let t = transcript(
        &hello.client_id,
        &hello.client_nonce,
        &hello.client_ephemeral,
        measurement,
        &server_ephemeral,
    );
    let session_key = derive_session_key(&shared, &t);
    let transcript_mac = confirm_mac(&session_key, &t);

    let attest = Attest {
        measurement: *measurement,
        server_ephemeral,
        transcript_mac,
    };
    write_frame(transport, MSG_ATTEST, &attest.encode())?;
    Ok((session_key, hello.client_id))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;
    use std::sync::{Arc, Condvar, Mutex};
    use std::thread;

    /// One direction of the in-memory pipe.
    struct Channel {
        buf: Mutex<(VecDeque<u8>, bool)>,
        ready: Condvar,
    }

    impl Channel {
        fn new() -> Arc<Self> {
            Arc::new(Channel {
                buf: Mutex::new((VecDeque::new(), false)),
                ready: Condvar::new(),
            })
        }
    }

    /// An endpoint of a bidirectional in-memory transport.
    struct Duplex {
        incoming: Arc<Channel>,
        outgoing: Arc<Channel>,
    }

    fn duplex_pair() -> (Duplex, Duplex) {
        let a = Channel::new();
        let b = Channel::new();
        (
            Duplex { incoming: Arc::clone(&a), outgoing: Arc::clone(&b) },
            Duplex { incoming: b, outgoing: a },
        )
    }

    impl Read for Duplex {
        fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
            let mut state = self.incoming.buf.lock().unwrap();
            loop {
                if !state.0.is_empty() {
                    let n = buf.len().min(state.0.len());
                    for slot in buf.iter_mut().take(n) {
                        *slot = state.0.pop_front().unwrap();
                    }
                    return Ok(n);
                }
                if state.1 {
                    return Ok(0); // closed and drained
                }
                state = self.incoming.ready.wait(state).unwrap();
            }
        }
    }

    impl Write for Duplex {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            let mut state = self.outgoing.buf.lock().unwrap();
            state.0.extend(buf.iter().copied());
            drop(state);
            self.outgoing.ready.notify_all();
            Ok(buf.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }

    impl Drop for Duplex {
        fn drop(&mut self) {
            let mut state = self.outgoing.buf.lock().unwrap();
            state.1 = true;
            drop(state);
            self.outgoing.ready.notify_all();
        }
    }

    /// A transport that flips one byte at a fixed offset in the write
    /// stream — a minimal in-path attacker.
    struct Tamper<T> {
        inner: T,
        written: usize,
        flip_at: usize,
    }

    impl<T: Read> Read for Tamper<T> {
        fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
            self.inner.read(buf)
        }
    }

    impl<T: Write> Write for Tamper<T> {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            let mut copy = buf.to_vec();
            if self.flip_at >= self.written && self.flip_at < self.written + buf.len() {
                copy[self.flip_at - self.written] ^= 0x01;
            }
            self.written += buf.len();
            self.inner.write_all(&copy)?;
            Ok(buf.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            self.inner.flush()
        }
    }

    const MEASUREMENT: [u8; 32] = [0xAB; 32];

    #[test]
    fn matching_measurement_yields_identical_keys() {
        let (mut client_end, mut server_end) = duplex_pair();
        let server = thread::spawn(move || {
            let mut rng = RandomStream::from_u64_seed(1001);
            handshake_server(&mut server_end, &MEASUREMENT, &mut rng).unwrap()
        });
        let mut rng = RandomStream::from_u64_seed(1002);
        let client_key = handshake_client(
            &mut client_end,
            ClientId::from_u128(77),
            &MEASUREMENT,
            &mut rng,
        )
        .unwrap();
        let (server_key, seen_id) = server.join().unwrap();
        assert_eq!(client_key, server_key);
        assert_eq!(seen_id, ClientId::from_u128(77));
    }

    #[test]
    fn wrong_pinned_measurement_aborts_client() {
        let (mut client_end, mut server_end) = duplex_pair();
        let server = thread::spawn(move || {
            let mut rng = RandomStream::from_u64_seed(1003);
            let _ = handshake_server(&mut server_end, &MEASUREMENT, &mut rng);
        });
        let mut rng = RandomStream::from_u64_seed(1004);
        let pinned = [0x00; 32];
        let err = handshake_client(
            &mut client_end,
            ClientId::from_u128(1),
            &pinned,
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Handshake(_)));
        assert!(err.to_string().contains("measurement"));
        server.join().unwrap();
    }

    #[test]
    fn tampered_server_ephemeral_fails_the_mac() {
        let (mut client_end, server_end) = duplex_pair();
        let server = thread::spawn(move || {
            // The ATTEST frame is the server's only write: header (5),
            // measurement (32), then the ephemeral — flip inside it.
            let mut tampered = Tamper { inner: server_end, written: 0, flip_at: 5 + 32 + 100 };
            let mut rng = RandomStream::from_u64_seed(1005);
            let _ = handshake_server(&mut tampered, &MEASUREMENT, &mut rng);
        });
        let mut rng = RandomStream::from_u64_seed(1006);
        let err = handshake_client(
            &mut client_end,
            ClientId::from_u128(2),
            &MEASUREMENT,
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Handshake(_)));
        assert!(err.to_string().contains("MAC"));
        server.join().unwrap();
    }

    #[test]
    fn degenerate_client_values_are_rejected() {
        let p = group_modulus();
        for value in [
            BigUint::from(0u32),
            BigUint::from(1u32),
            &p - 1u32,
            p.clone(),
        ] {
            let hello = Hello {
                client_id: ClientId::from_u128(3),
                client_nonce: [0; NONCE_LEN],
                client_ephemeral: pad_element(&value),
            };
            let (mut client_end, mut server_end) = duplex_pair();
            write_frame(&mut client_end, MSG_HELLO, &hello.encode()).unwrap();
            let mut rng = RandomStream::from_u64_seed(1007);
            let err = handshake_server(&mut server_end, &MEASUREMENT, &mut rng).unwrap_err();
            assert!(matches!(err, Error::Handshake(_)), "value {value} accepted");
        }
    }

    #[test]
    fn unexpected_first_frame_is_a_handshake_error() {
        let (mut client_end, mut server_end) = duplex_pair();
        write_frame(&mut client_end, MSG_NOISE_REPORT_LIKE, &[0; 8]).unwrap();
        let mut rng = RandomStream::from_u64_seed(1008);
        assert!(handshake_server(&mut server_end, &MEASUREMENT, &mut rng).is_err());
    }

    // A stand-in message type for the unexpected-frame test.
    const MSG_NOISE_REPORT_LIKE: u8 = 0x10;

    #[test]
    fn group_modulus_is_the_expected_prime() {
        let p = group_modulus();
        assert_eq!(p.bits(), 2048);
        // Miller–Rabin with fixed small bases: for a constant this size a
        // transcription slip would make the number composite with
        // overwhelming probability, and composites fail these witnesses.
        let one = BigUint::from(1u32);
        let two = BigUint::from(2u32);
        let p_minus_1 = &p - &one;
        let mut d = p_minus_1.clone();
        let mut r = 0u32;
        while &d % &two == BigUint::ZERO {
            d >>= 1;
            r += 1;
        }
        for base in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
            let mut x = BigUint::from(base).modpow(&d, &p);
            if x == one || x == p_minus_1 {
                continue;
            }
            let mut witness = true;
            for _ in 0..r - 1 {
                x = x.modpow(&two, &p);
                if x == p_minus_1 {
                    witness = false;
                    break;
                }
            }
            assert!(!witness, "base {base} witnesses compositeness");
        }
    }
}
