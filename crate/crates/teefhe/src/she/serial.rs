//! Byte-exact serialization envelopes for every scheme object.
//!
//! Every envelope starts with the same little-endian 27-byte header:
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `"TFHE"`                |
//! | 4      | 1    | format version (1)            |
//! | 5      | 1    | object kind                   |
//! | 6      | 4    | ring degree `n` (u32)         |
//! | 10     | 8    | coefficient modulus `q` (u64) |
//! | 18     | 8    | plaintext modulus `t` (u64)   |
//! | 26     | 1    | part count                    |
//!
//! The body is kind-specific; polynomial parts are stored as `n` u64 words
//! each. Deserialization validates magic, version, kind, moduli, part
//! counts, exact total length, and that every coefficient is reduced;
//! errors carry the byte offset of the first offending byte. The parameter
//! identity `params_id` is a truncated hash over `(n, q, t)` and is
//! therefore recomputable from any envelope header.

use crate::error::{Error, Result};
use crate::ring::{Modulus, Poly};

use super::ciphertext::Ciphertext;
use super::context::SheContext;
use super::encode::Plaintext;
use super::keys::{EvalKeys, PublicKey, SecretKey};
use super::params::{compute_params_id, EncryptionParams};

/// Envelope magic bytes.
pub const MAGIC: &[u8; 4] = b"TFHE";
/// Envelope format version.
pub const VERSION: u8 = 1;
/// Header size in bytes.
pub const HEADER_LEN: usize = 27;

/// Object kind codes.
pub const KIND_CIPHERTEXT: u8 = 0x01;
/// Plaintext polynomial.
pub const KIND_PLAINTEXT: u8 = 0x02;
/// Public encryption key.
pub const KIND_PUBLIC_KEY: u8 = 0x03;
/// Secret key.
pub const KIND_SECRET_KEY: u8 = 0x04;
/// Relinearization key set.
pub const KIND_EVAL_KEYS: u8 = 0x05;
/// Parameter set.
pub const KIND_PARAMS: u8 = 0x06;

fn err_at(offset: usize, reason: impl Into<String>) -> Error {
    Error::Deserialize { offset, reason: reason.into() }
}

fn write_header(out: &mut Vec<u8>, kind: u8, n: usize, q: u64, t: u64, parts: u8) {
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(kind);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&q.to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    out.push(parts);
}

fn write_poly(out: &mut Vec<u8>, poly: &Poly) {
    for &c in poly.coeffs() {
        out.extend_from_slice(&c.to_le_bytes());
    }
}

/// Parsed header fields plus the validated moduli.
struct Header {
    n: usize,
    q: u64,
    t: u64,
    parts: usize,
}

fn read_header(bytes: &[u8], expected_kind: u8) -> Result<Header> {
    if bytes.len() < HEADER_LEN {
        return Err(err_at(bytes.len(), "truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(err_at(0, "bad magic"));
    }
    if bytes[4] != VERSION {
        return Err(err_at(4, format!("unsupported version {}", bytes[4])));
    }
    if bytes[5] != expected_kind {
        return Err(err_at(
            5,
            format!("kind {:#04x}, expected {expected_kind:#04x}", bytes[5]),
        ));
    }
    let n = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    if !n.is_power_of_two() || !(super::params::MIN_DEGREE..=super::params::MAX_DEGREE).contains(&n)
    {
        return Err(err_at(6, format!("invalid ring degree {n}")));
    }
    let q = u64::from_le_bytes(bytes[10..18].try_into().unwrap());
    if q < 2 {
        return Err(err_at(10, format!("invalid coefficient modulus {q}")));
    }
    let t = u64::from_le_bytes(bytes[18..26].try_into().unwrap());
    if t < 2 || t >= q {
        return Err(err_at(18, format!("invalid plaintext modulus {t}")));
    }
    Ok(Header { n, q, t, parts: bytes[26] as usize })
}

/// Reads `count` polynomial parts over `modulus` starting at `offset`,
/// rejecting unreduced coefficients with their exact byte offset.
fn read_parts(
    bytes: &[u8],
    offset: usize,
    count: usize,
    n: usize,
    modulus: Modulus,
) -> Result<Vec<Poly>> {
    let mut parts = Vec::with_capacity(count);
    let mut pos = offset;
    for _ in 0..count {
        let mut coeffs = Vec::with_capacity(n);
        for _ in 0..n {
            let end = pos + 8;
            if end > bytes.len() {
                return Err(err_at(bytes.len(), "truncated polynomial data"));
            }
            let word = u64::from_le_bytes(bytes[pos..end].try_into().unwrap());
            if word >= modulus.value() {
                return Err(err_at(
                    pos,
                    format!("coefficient {word} not reduced modulo {}", modulus.value()),
                ));
            }
            coeffs.push(word);
            pos = end;
        }
        parts.push(Poly::from_coeffs(coeffs, modulus));
    }
    Ok(parts)
}

fn expect_exact_len(bytes: &[u8], expected: usize) -> Result<()> {
    if bytes.len() > expected {
        return Err(err_at(expected, format!("{} trailing bytes", bytes.len() - expected)));
    }
    if bytes.len() < expected {
        return Err(err_at(bytes.len(), "truncated envelope"));
    }
    Ok(())
}

fn check_owner(params: &EncryptionParams, object_id: u64, what: &str) -> Result<()> {
    if params.params_id() != object_id {
        return Err(Error::ParameterMismatch(format!(
            "{what} belongs to a different parameter set"
        )));
    }
    Ok(())
}

/// Reads the `(n, q, t)` identity hash out of any envelope without decoding
/// the body.
pub fn params_id_from_envelope(bytes: &[u8]) -> Result<u64> {
    if bytes.len() < HEADER_LEN {
        return Err(err_at(bytes.len(), "truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(err_at(0, "bad magic"));
    }
    let n = u32::from_le_bytes(bytes[6..10].try_into().unwrap());
    let q = u64::from_le_bytes(bytes[10..18].try_into().unwrap());
    let t = u64::from_le_bytes(bytes[18..26].try_into().unwrap());
    Ok(compute_params_id(n, q, t))
}

/// Serializes a parameter set (40 bytes).
pub fn serialize_params(params: &EncryptionParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(40);
    write_header(
        &mut out,
        KIND_PARAMS,
        params.n(),
        params.q().value(),
        params.t().value(),
        0,
    );
    out.extend_from_slice(&params.noise_width().to_le_bytes());
    out.extend_from_slice(&(params.noise_clip() as u32).to_le_bytes());
    out.push(params.relin_window());
    out
}

/// Deserializes and fully re-validates a parameter set.
pub fn deserialize_params(bytes: &[u8]) -> Result<EncryptionParams> {
    let h = read_header(bytes, KIND_PARAMS)?;
    if h.parts != 0 {
        return Err(err_at(26, format!("parameter envelope with {} parts", h.parts)));
    }
    expect_exact_len(bytes, HEADER_LEN + 13)?;
    let noise_width = f64::from_le_bytes(bytes[27..35].try_into().unwrap());
    let noise_clip = u32::from_le_bytes(bytes[35..39].try_into().unwrap()) as u64;
    let relin_window = bytes[39];
    EncryptionParams::new(
        h.n,
        Modulus::new(h.q)?,
        Modulus::new(h.t)?,
        noise_width,
        noise_clip,
        relin_window,
    )
}

/// Serializes a ciphertext (`27 + size·n·8` bytes).
pub fn serialize_ciphertext(params: &EncryptionParams, ct: &Ciphertext) -> Result<Vec<u8>> {
    check_owner(params, ct.params_id(), "ciphertext")?;
    let mut out = Vec::with_capacity(HEADER_LEN + ct.size() * ct.len() * 8);
    write_header(
        &mut out,
        KIND_CIPHERTEXT,
        params.n(),
        params.q().value(),
        params.t().value(),
        ct.size() as u8,
    );
    for part in ct.parts() {
        write_poly(&mut out, part);
    }
    Ok(out)
}

/// Deserializes a ciphertext, validating shape and reduction.
pub fn deserialize_ciphertext(bytes: &[u8]) -> Result<Ciphertext> {
    let h = read_header(bytes, KIND_CIPHERTEXT)?;
    if !(2..=3).contains(&h.parts) {
        return Err(err_at(26, format!("ciphertext with {} parts", h.parts)));
    }
    expect_exact_len(bytes, HEADER_LEN + h.parts * h.n * 8)?;
    let q = Modulus::new(h.q)?;
    let parts = read_parts(bytes, HEADER_LEN, h.parts, h.n, q)?;
    Ciphertext::from_parts(compute_params_id(h.n as u32, h.q, h.t), parts)
}

/// Serializes a plaintext (`27 + n·8` bytes).
pub fn serialize_plaintext(params: &EncryptionParams, pt: &Plaintext) -> Result<Vec<u8>> {
    check_owner(params, pt.params_id(), "plaintext")?;
    let mut out = Vec::with_capacity(HEADER_LEN + pt.len() * 8);
    write_header(
        &mut out,
        KIND_PLAINTEXT,
        params.n(),
        params.q().value(),
        params.t().value(),
        1,
    );
    write_poly(&mut out, pt.poly());
    Ok(out)
}

/// Deserializes a plaintext, validating reduction modulo `t`.
pub fn deserialize_plaintext(bytes: &[u8]) -> Result<Plaintext> {
    let h = read_header(bytes, KIND_PLAINTEXT)?;
    if h.parts != 1 {
        return Err(err_at(26, format!("plaintext with {} parts", h.parts)));
    }
    expect_exact_len(bytes, HEADER_LEN + h.n * 8)?;
    let t = Modulus::new(h.t)?;
    let mut parts = read_parts(bytes, HEADER_LEN, 1, h.n, t)?;
    Ok(Plaintext::from_poly(
        compute_params_id(h.n as u32, h.q, h.t),
        parts.remove(0),
    ))
}

/// Serializes a secret key (`27 + n·8` bytes).
pub fn serialize_secret_key(params: &EncryptionParams, sk: &SecretKey) -> Result<Vec<u8>> {
    check_owner(params, sk.params_id(), "secret key")?;
    let mut out = Vec::with_capacity(HEADER_LEN + params.n() * 8);
    write_header(
        &mut out,
        KIND_SECRET_KEY,
        params.n(),
        params.q().value(),
        params.t().value(),
        1,
    );
    write_poly(&mut out, sk.poly());
    Ok(out)
}

/// Deserializes a secret key from a buffer that may contain trailing data,
/// returning the key and the number of bytes consumed.
pub(crate) fn deserialize_secret_key_prefix(bytes: &[u8]) -> Result<(SecretKey, usize)> {
    let h = read_header(bytes, KIND_SECRET_KEY)?;
    if h.parts != 1 {
        return Err(err_at(26, format!("secret key with {} parts", h.parts)));
    }
    let total = HEADER_LEN + h.n * 8;
    let q = Modulus::new(h.q)?;
    let mut parts = read_parts(bytes, HEADER_LEN, 1, h.n, q)?;
    let s = parts.remove(0);
    for (i, &c) in s.coeffs().iter().enumerate() {
        if c != 0 && c != 1 && c != h.q - 1 {
            return Err(err_at(
                HEADER_LEN + i * 8,
                format!("secret coefficient {c} is not ternary"),
            ));
        }
    }
    Ok((
        SecretKey::from_poly(compute_params_id(h.n as u32, h.q, h.t), s),
        total,
    ))
}

/// Deserializes a secret key, validating ternary coefficients.
pub fn deserialize_secret_key(bytes: &[u8]) -> Result<SecretKey> {
    let (sk, consumed) = deserialize_secret_key_prefix(bytes)?;
    expect_exact_len(bytes, consumed)?;
    Ok(sk)
}

/// Serializes a public key (`27 + 2·n·8` bytes).
pub fn serialize_public_key(params: &EncryptionParams, pk: &PublicKey) -> Result<Vec<u8>> {
    check_owner(params, pk.params_id(), "public key")?;
    let mut out = Vec::with_capacity(HEADER_LEN + 2 * params.n() * 8);
    write_header(
        &mut out,
        KIND_PUBLIC_KEY,
        params.n(),
        params.q().value(),
        params.t().value(),
        2,
    );
    write_poly(&mut out, pk.pk0());
    write_poly(&mut out, pk.pk1());
    Ok(out)
}

/// Deserializes a public key from a buffer that may contain trailing data,
/// returning the key and the number of bytes consumed.
pub(crate) fn deserialize_public_key_prefix(bytes: &[u8]) -> Result<(PublicKey, usize)> {
    let h = read_header(bytes, KIND_PUBLIC_KEY)?;
    if h.parts != 2 {
        return Err(err_at(26, format!("public key with {} parts", h.parts)));
    }
    let total = HEADER_LEN + 2 * h.n * 8;
    let q = Modulus::new(h.q)?;
    let mut parts = read_parts(bytes, HEADER_LEN, 2, h.n, q)?;
    let pk1 = parts.remove(1);
    let pk0 = parts.remove(0);
    Ok((
        PublicKey::from_polys(compute_params_id(h.n as u32, h.q, h.t), pk0, pk1),
        total,
    ))
}

/// Deserializes a public key.
pub fn deserialize_public_key(bytes: &[u8]) -> Result<PublicKey> {
    let (pk, consumed) = deserialize_public_key_prefix(bytes)?;
    expect_exact_len(bytes, consumed)?;
    Ok(pk)
}

/// Serializes evaluation keys (`28 + 2·digits·n·8` bytes): one window byte
/// then the interleaved key pairs.
pub fn serialize_eval_keys(params: &EncryptionParams, evk: &EvalKeys) -> Result<Vec<u8>> {
    check_owner(params, evk.params_id(), "evaluation keys")?;
    let mut out = Vec::with_capacity(HEADER_LEN + 1 + 2 * evk.digit_count() * params.n() * 8);
    write_header(
        &mut out,
        KIND_EVAL_KEYS,
        params.n(),
        params.q().value(),
        params.t().value(),
        (2 * evk.digit_count()) as u8,
    );
    out.push(evk.window());
    for (evk0, evk1) in evk.pairs() {
        write_poly(&mut out, evk0);
        write_poly(&mut out, evk1);
    }
    Ok(out)
}

/// Deserializes evaluation keys, validating that the digit count covers the
/// modulus under the declared window.
pub fn deserialize_eval_keys(bytes: &[u8]) -> Result<EvalKeys> {
    let h = read_header(bytes, KIND_EVAL_KEYS)?;
    if h.parts == 0 || h.parts % 2 != 0 {
        return Err(err_at(26, format!("evaluation keys with {} parts", h.parts)));
    }
    if bytes.len() < HEADER_LEN + 1 {
        return Err(err_at(bytes.len(), "truncated evaluation keys"));
    }
    let window = bytes[HEADER_LEN];
    if window == 0 || window > 62 {
        return Err(err_at(HEADER_LEN, format!("invalid window {window}")));
    }
    let q = Modulus::new(h.q)?;
    let digits = h.parts / 2;
    let needed = ((q.bits() + window as u32 - 1) / window as u32) as usize;
    if digits != needed {
        return Err(err_at(
            26,
            format!("{digits} digit pairs cannot decompose a {}-bit modulus at window {window}", q.bits()),
        ));
    }
    expect_exact_len(bytes, HEADER_LEN + 1 + h.parts * h.n * 8)?;
    let flat = read_parts(bytes, HEADER_LEN + 1, h.parts, h.n, q)?;
    let mut pairs = Vec::with_capacity(digits);
    let mut iter = flat.into_iter();
    while let (Some(evk0), Some(evk1)) = (iter.next(), iter.next()) {
        pairs.push((evk0, evk1));
    }
    Ok(EvalKeys::from_pairs(
        compute_params_id(h.n as u32, h.q, h.t),
        window,
        pairs,
    ))
}

/// Total length of the envelope starting at `bytes[0]`, computed from its
/// header alone. Lets callers split concatenated envelopes (key files,
/// sealed provisioning payloads) without decoding bodies.
pub fn envelope_len(bytes: &[u8]) -> Result<usize> {
    if bytes.len() < HEADER_LEN {
        return Err(err_at(bytes.len(), "truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(err_at(0, "bad magic"));
    }
    let kind = bytes[5];
    let n = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    if !n.is_power_of_two() || !(super::params::MIN_DEGREE..=super::params::MAX_DEGREE).contains(&n)
    {
        return Err(err_at(6, format!("invalid ring degree {n}")));
    }
    let parts = bytes[26] as usize;
    match kind {
        KIND_PARAMS => Ok(HEADER_LEN + 13),
        KIND_CIPHERTEXT | KIND_PLAINTEXT | KIND_PUBLIC_KEY | KIND_SECRET_KEY => {
            Ok(HEADER_LEN + parts * n * 8)
        }
        KIND_EVAL_KEYS => Ok(HEADER_LEN + 1 + parts * n * 8),
        other => Err(err_at(5, format!("unknown object kind {other:#04x}"))),
    }
}

/// Convenience: deserializes a ciphertext and checks it belongs to the
/// given context.
pub fn deserialize_ciphertext_for(ctx: &SheContext, bytes: &[u8]) -> Result<Ciphertext> {
    let ct = deserialize_ciphertext(bytes)?;
    if ct.params_id() != ctx.params().params_id() {
        return Err(Error::ParameterMismatch(
            "ciphertext envelope belongs to a different parameter set".into(),
        ));
    }
    Ok(ct)
}
