//! Authenticated encryption for key provisioning.
//!
//! Key material crossing the channel is sealed with an
//! encrypt-then-MAC construction built from primitives already in the
//! dependency tree: a ChaCha-based keystream whose seed is derived from the
//! session key and nonce, and an HMAC-SHA-256 tag truncated to 16 bytes.
//! The contract is the conventional AEAD shape — 32-byte key, 12-byte
//! nonce, 16-byte tag, optional associated data — so the construction can
//! be swapped for a standards-track cipher without touching callers.
//!
//! Nonces are message counters, never random: each direction of a channel
//! prefixes its counter with a distinct direction byte, which rules out
//! nonce reuse between the two directions under the same session key.

use hmac::{Hmac, Mac};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Session key length in bytes.
pub const KEY_LEN: usize = 32;
/// Nonce length in bytes.
pub const NONCE_LEN: usize = 12;
/// Authentication tag length in bytes.
pub const TAG_LEN: usize = 16;

/// Direction byte for client-to-server messages.
pub const DIR_CLIENT: u8 = 0x01;
/// Direction byte for server-to-client messages.
pub const DIR_SERVER: u8 = 0x02;

/// Builds a counter nonce: direction byte, three zero bytes, then the
/// counter in big-endian order.
pub fn counter_nonce(direction: u8, counter: u64) -> [u8; NONCE_LEN] {
    let mut nonce = [0u8; NONCE_LEN];
    nonce[0] = direction;
    nonce[4..].copy_from_slice(&counter.to_be_bytes());
    nonce
}

/// Derives the keystream seed for one (key, nonce) pair.
fn keystream_seed(key: &[u8; KEY_LEN], nonce: &[u8; NONCE_LEN]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(key);
    h.update(b"aead-keystream");
    h.update(nonce);
    h.finalize().into()
}

/// Derives the MAC key for a session key.
fn mac_key(key: &[u8; KEY_LEN]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(key);
    h.update(b"aead-mac");
    h.finalize().into()
}

/// XORs the keystream for (key, nonce) into `buf`.
fn apply_keystream(key: &[u8; KEY_LEN], nonce: &[u8; NONCE_LEN], buf: &mut [u8]) {
    let mut rng = ChaCha20Rng::from_seed(keystream_seed(key, nonce));
    let mut pad = vec![0u8; buf.len()];
    rng.fill_bytes(&mut pad);
    for (b, p) in buf.iter_mut().zip(pad) {
        *b ^= p;
    }
}

/// Computes the truncated tag over nonce, associated data, and ciphertext.
///
/// The associated-data length is folded in explicitly so (aad, ciphertext)
/// boundaries cannot be shifted without changing the tag.
fn compute_mac(
    key: &[u8; KEY_LEN],
    nonce: &[u8; NONCE_LEN],
    aad: &[u8],
    ciphertext: &[u8],
) -> Hmac<Sha256> {
    let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(&mac_key(key)).expect("hmac accepts any key length");
    mac.update(nonce);
    mac.update(&(aad.len() as u64).to_be_bytes());
    mac.update(aad);
    mac.update(ciphertext);
    mac
}

/// Seals `plaintext`, returning ciphertext followed by the 16-byte tag.
pub fn seal(
    key: &[u8; KEY_LEN],
    nonce: &[u8; NONCE_LEN],
    aad: &[u8],
    plaintext: &[u8],
) -> Vec<u8> {
    let mut out = plaintext.to_vec();
    apply_keystream(key, nonce, &mut out);
    let tag = compute_mac(key, nonce, aad, &out).finalize().into_bytes();
    out.extend_from_slice(&tag[..TAG_LEN]);
    out
}

/// Opens a sealed buffer, verifying the tag before decrypting.
///
/// Returns [`Error::AeadTag`] when the buffer is too short, the tag does
/// not verify, or any of key, nonce, or associated data differ from the
/// values used to seal.
pub fn open(
    key: &[u8; KEY_LEN],
    nonce: &[u8; NONCE_LEN],
    aad: &[u8],
    sealed: &[u8],
) -> Result<Vec<u8>> {
    if sealed.len() < TAG_LEN {
        return Err(Error::AeadTag);
    }
    let split = sealed.len() - TAG_LEN;
    let (ciphertext, tag) = sealed.split_at(split);
    let mac = compute_mac(key, nonce, aad, ciphertext);
    // Constant-time comparison of the truncated tag.
    mac.verify_truncated_left(tag).map_err(|_| Error::AeadTag)?;
    let mut out = ciphertext.to_vec();
    apply_keystream(key, nonce, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(byte: u8) -> [u8; KEY_LEN] {
        [byte; KEY_LEN]
    }

    #[test]
    fn round_trip_with_aad() {
        let k = key(7);
        let nonce = counter_nonce(DIR_CLIENT, 0);
        let sealed = seal(&k, &nonce, b"client-1", b"secret payload");
        assert_eq!(sealed.len(), 14 + TAG_LEN);
        let opened = open(&k, &nonce, b"client-1", &sealed).unwrap();
        assert_eq!(opened, b"secret payload");
    }

    #[test]
    fn empty_plaintext_round_trips() {
        let k = key(1);
        let nonce = counter_nonce(DIR_SERVER, 9);
        let sealed = seal(&k, &nonce, b"", b"");
        assert_eq!(sealed.len(), TAG_LEN);
        assert_eq!(open(&k, &nonce, b"", &sealed).unwrap(), b"");
    }

    #[test]
    fn tampering_is_detected() {
        let k = key(3);
        let nonce = counter_nonce(DIR_CLIENT, 5);
        let sealed = seal(&k, &nonce, b"aad", b"0123456789");
        // Flip one ciphertext bit.
        let mut bad = sealed.clone();
        bad[0] ^= 1;
        assert!(matches!(open(&k, &nonce, b"aad", &bad), Err(Error::AeadTag)));
        // Flip one tag bit.
        let mut bad = sealed.clone();
        let last = bad.len() - 1;
        bad[last] ^= 0x80;
        assert!(matches!(open(&k, &nonce, b"aad", &bad), Err(Error::AeadTag)));
        // Wrong associated data.
        assert!(matches!(
            open(&k, &nonce, b"oth", &sealed),
            Err(Error::AeadTag)
        ));
        // Wrong nonce.
        let other = counter_nonce(DIR_CLIENT, 6);
        assert!(matches!(
            open(&k, &other, b"aad", &sealed),
            Err(Error::AeadTag)
        ));
        // Wrong key.
        assert!(matches!(
            open(&key(4), &nonce, b"aad", &sealed),
            Err(Error::AeadTag)
        ));
        // Truncated buffer.
        assert!(matches!(
            open(&k, &nonce, b"aad", &sealed[..TAG_LEN - 1]),
            Err(Error::AeadTag)
        ));
    }

    #[test]
    fn distinct_nonces_give_distinct_ciphertexts() {
        let k = key(9);
        let a = seal(&k, &counter_nonce(DIR_CLIENT, 0), b"", b"same message");
        let b = seal(&k, &counter_nonce(DIR_CLIENT, 1), b"", b"same message");
        let c = seal(&k, &counter_nonce(DIR_SERVER, 0), b"", b"same message");
        assert_ne!(a[..12], b[..12]);
        assert_ne!(a[..12], c[..12]);
        // Sealing is deterministic for a fixed (key, nonce, aad, message).
        let a2 = seal(&k, &counter_nonce(DIR_CLIENT, 0), b"", b"same message");
        assert_eq!(a, a2);
    }

    #[test]
    fn nonce_layout_is_direction_then_counter() {
        let nonce = counter_nonce(DIR_SERVER, 0x0102_0304_0506_0708);
        assert_eq!(nonce[0], DIR_SERVER);
        assert_eq!(&nonce[1..4], &[0, 0, 0]);
        assert_eq!(&nonce[4..], &[1, 2, 3, 4, 5, 6, 7, 8]);
    }
}
