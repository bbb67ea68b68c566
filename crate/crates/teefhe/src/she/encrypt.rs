//! Encryption: public-key and symmetric, plus the instrumented symmetric
//! variant used inside the enclave's refresh path.

use crate::error::{Error, Result};
use crate::ring::ct::{add_mod_traced, mul_mod_traced, sub_mod_traced};
use crate::ring::{Poly, RandomStream, SecretSlice};

use super::ciphertext::Ciphertext;
use super::context::SheContext;
use super::encode::Plaintext;
use super::keys::{PublicKey, SecretKey};

/// Lifts a plaintext to its scaled embedding `Δ·m` over `q`.
fn scaled_embedding(ctx: &SheContext, pt: &Plaintext) -> Result<Poly> {
    let params = ctx.params();
    let q = params.q();
    let delta = params.scaling_factor();
    let coeffs: Vec<u64> = pt
        .coeffs()
        .iter()
        .map(|&m| q.mul_mod(delta, m))
        .collect();
    Ok(Poly::from_coeffs(coeffs, q))
}

/// Encrypts under the public key:
/// `c0 = pk0·u + e1 + Δ·m`, `c1 = pk1·u + e2` for ternary `u` and fresh
/// errors `e1, e2`.
pub fn encrypt(
    ctx: &SheContext,
    pk: &PublicKey,
    pt: &Plaintext,
    rng: &mut RandomStream,
) -> Result<Ciphertext> {
    let params = ctx.params();
    if pk.params_id() != params.params_id() || pt.params_id() != params.params_id() {
        return Err(Error::ParameterMismatch(
            "public key or plaintext belongs to a different parameter set".into(),
        ));
    }
    let (n, q) = (params.n(), params.q());
    let u = rng.ternary_poly(n, q);
    let e1 = rng.error_poly(n, q, params.noise_width(), params.noise_clip());
    let e2 = rng.error_poly(n, q, params.noise_width(), params.noise_clip());
    let c0 = ctx
        .tables()
        .mul(pk.pk0(), &u)?
        .add(&e1)?
        .add(&scaled_embedding(ctx, pt)?)?;
    let c1 = ctx.tables().mul(pk.pk1(), &u)?.add(&e2)?;
    Ciphertext::from_parts(params.params_id(), vec![c0, c1])
}

/// Encrypts under the secret key:
/// `c0 = -(a·s) + e + Δ·m`, `c1 = a` for uniform `a` and fresh error `e`.
pub fn encrypt_symmetric(
    ctx: &SheContext,
    sk: &SecretKey,
    pt: &Plaintext,
    rng: &mut RandomStream,
) -> Result<Ciphertext> {
    let params = ctx.params();
    if sk.params_id() != params.params_id() || pt.params_id() != params.params_id() {
        return Err(Error::ParameterMismatch(
            "secret key or plaintext belongs to a different parameter set".into(),
        ));
    }
    let (n, q) = (params.n(), params.q());
    let a = rng.uniform_poly(n, q);
    let e = rng.error_poly(n, q, params.noise_width(), params.noise_clip());
    let c0 = ctx
        .tables()
        .mul(&a, sk.poly())?
        .negate()
        .add(&e)?
        .add(&scaled_embedding(ctx, pt)?)?;
    Ciphertext::from_parts(params.params_id(), vec![c0, a])
}

/// Instrumented symmetric encryption over a padded message buffer.
///
/// This is the re-encryption half of the enclave refresh path. The input is
/// a fixed-size buffer of `n + 1` plaintext words (the decrypt half always
/// writes the pad slot as zero); every slot is read through the recording
/// wrapper and each coefficient is assembled with the instrumented word
/// operations, so the captured access pattern has a shape that depends only
/// on the ring dimensions, never on key or message values.
pub(crate) fn encrypt_symmetric_traced(
    ctx: &SheContext,
    sk: &SecretKey,
    padded: &SecretSlice<'_>,
    rng: &mut RandomStream,
) -> Result<Ciphertext> {
    let params = ctx.params();
    if sk.params_id() != params.params_id() {
        return Err(Error::ParameterMismatch(
            "secret key belongs to a different parameter set".into(),
        ));
    }
    let (n, q) = (params.n(), params.q());
    if padded.len() != n + 1 {
        return Err(Error::InvalidParameters(format!(
            "padded buffer holds {} words, expected {}",
            padded.len(),
            n + 1
        )));
    }
    let delta = q.reduce(params.scaling_factor());
    // Read the entire padded buffer with a fixed pattern; the pad word
    // participates in the scan but carries no message.
    let mut embedded = vec![0u64; n];
    for i in 0..=n {
        let m = padded.get(i);
        if i < n {
            embedded[i] = mul_mod_traced(q, delta, m);
        }
    }
    let a = rng.uniform_poly(n, q);
    let e = rng.error_vec_signed(n, params.noise_width(), params.noise_clip());
    let a_s = ctx.tables().mul(&a, sk.poly())?;
    let mut c0 = vec![0u64; n];
    for i in 0..n {
        // c0_i = Δ·m_i + e_i - (a·s)_i, one fixed instruction sequence per
        // coefficient.
        let e_lift = if e[i] >= 0 {
            q.reduce(e[i] as u64)
        } else {
            q.value() - q.reduce(e[i].unsigned_abs())
        };
        let with_error = add_mod_traced(q, embedded[i], e_lift);
        c0[i] = sub_mod_traced(q, with_error, a_s.coeffs()[i]);
    }
    Ciphertext::from_parts(
        params.params_id(),
        vec![Poly::from_coeffs(c0, q), a],
    )
}
