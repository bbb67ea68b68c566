//! Decryption: standard API plus the instrumented variant used inside the
//! enclave's refresh path.

use crate::error::{Error, Result};
use crate::ring::ct::{add_mod_traced, round_div_traced};
use crate::ring::{Poly, SecretSliceMut};

use super::ciphertext::Ciphertext;
use super::context::SheContext;
use super::encode::Plaintext;
use super::keys::SecretKey;

/// Computes the decryption phase `v = Σ_k ct_k·s^k` over `q`.
pub(crate) fn phase(ctx: &SheContext, sk: &SecretKey, ct: &Ciphertext) -> Result<Poly> {
    let params = ctx.params();
    if sk.params_id() != params.params_id() || ct.params_id() != params.params_id() {
        return Err(Error::ParameterMismatch(
            "secret key or ciphertext belongs to a different parameter set".into(),
        ));
    }
    let mut v = ct.part(0).clone();
    let mut s_power = sk.poly().clone();
    for k in 1..ct.size() {
        v = v.add(&ctx.tables().mul(ct.part(k), &s_power)?)?;
        if k + 1 < ct.size() {
            s_power = ctx.tables().mul(&s_power, sk.poly())?;
        }
    }
    Ok(v)
}

/// Decrypts a ciphertext of any size under the secret key: each phase
/// coefficient rounds to the digit `m_i = ⌊(t·v_i + q/2) / q⌋ mod t`.
pub fn decrypt(ctx: &SheContext, sk: &SecretKey, ct: &Ciphertext) -> Result<Plaintext> {
    let params = ctx.params();
    let v = phase(ctx, sk, ct)?;
    let (t, q) = (params.t().value(), params.q().value());
    let digits: Vec<u64> = v
        .coeffs()
        .iter()
        .map(|&vi| {
            let num = t as u128 * vi as u128;
            (((num + (q as u128) / 2) / q as u128) % t as u128) as u64
        })
        .collect();
    let poly = Poly::from_coeffs(digits, params.t());
    Ok(Plaintext::from_poly(params.params_id(), poly))
}

/// Instrumented decryption into a padded output buffer of `n + 1` words.
///
/// This is the first half of the enclave refresh path: the phase is
/// accumulated with instrumented ring operations, every rounding division is
/// recorded, and the plaintext digits are written through the recording
/// wrapper with a fixed store pattern — slots `0..n` carry the message and
/// the pad slot `n` is always written as zero, so the buffer shape and the
/// access sequence depend only on the ring dimensions and ciphertext size.
pub(crate) fn decrypt_traced(
    ctx: &SheContext,
    sk: &SecretKey,
    ct: &Ciphertext,
    out: &mut SecretSliceMut<'_>,
) -> Result<()> {
    let params = ctx.params();
    if sk.params_id() != params.params_id() || ct.params_id() != params.params_id() {
        return Err(Error::ParameterMismatch(
            "secret key or ciphertext belongs to a different parameter set".into(),
        ));
    }
    let n = params.n();
    if out.len() != n + 1 {
        return Err(Error::InvalidParameters(format!(
            "padded buffer holds {} words, expected {}",
            out.len(),
            n + 1
        )));
    }
    let q = params.q();
    let t = params.t().value();
    // v = Σ_k ct_k·s^k, accumulated coefficient-wise through the
    // instrumented word operations; the transform layer records its own.
    let mut v = ct.part(0).coeffs().to_vec();
    let mut s_power = sk.poly().clone();
    for k in 1..ct.size() {
        let product = ctx.tables().mul(ct.part(k), &s_power)?;
        for i in 0..n {
            v[i] = add_mod_traced(q, v[i], product.coeffs()[i]);
        }
        if k + 1 < ct.size() {
            s_power = ctx.tables().mul(&s_power, sk.poly())?;
        }
    }
    for (i, &vi) in v.iter().enumerate() {
        let num = t as u128 * vi as u128;
        let digit = round_div_traced(num, q.value()) % t;
        out.set(i, digit);
    }
    out.set(n, 0);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::{trace_capture, Modulus, RandomStream, TraceOp};
    use crate::she::encrypt::{encrypt, encrypt_symmetric};
    use crate::she::keys::generate_keys;
    use crate::she::params::EncryptionParams;

    #[test]
    fn frozen_noiseless_ciphertext_decrypts_exactly() {
        // q is the smallest prime ≥ 2^20 congruent to 1 mod 256, so Δ = 4098
        // and a noiseless (Δ·m, 0) pair must decrypt to exactly m.
        let q = Modulus::new(1_049_089).unwrap();
        let t = Modulus::new(256).unwrap();
        let params = EncryptionParams::new(8, q, t, 0.0, 0, 16).unwrap();
        assert_eq!(params.scaling_factor(), 4098);
        let ctx = SheContext::new(params).unwrap();
        let mut rng = RandomStream::from_u64_seed(3);
        let (sk, _) = generate_keys(&ctx, &mut rng).unwrap();
        let message = [3u64, 7, 250, 0, 128, 255, 1, 42];
        let delta = ctx.params().scaling_factor();
        let c0 = Poly::from_coeffs(message.map(|m| m * delta).to_vec(), q);
        let c1 = Poly::zero(8, q);
        let ct = Ciphertext::from_parts(ctx.params().params_id(), vec![c0, c1]).unwrap();
        let pt = decrypt(&ctx, &sk, &ct).unwrap();
        assert_eq!(pt.coeffs(), &message);
    }

    #[test]
    fn zero_width_sampler_gives_exact_symmetric_round_trip() {
        let q = Modulus::new(1_049_089).unwrap();
        let t = Modulus::new(256).unwrap();
        let params = EncryptionParams::new(8, q, t, 0.0, 0, 16).unwrap();
        let ctx = SheContext::new(params).unwrap();
        let mut rng = RandomStream::from_u64_seed(4);
        let (sk, pk) = generate_keys(&ctx, &mut rng).unwrap();
        let pt = Plaintext::new(ctx.params(), &[9, 8, 7, 6, 5, 4, 3, 2]).unwrap();
        let ct = encrypt_symmetric(&ctx, &sk, &pt, &mut rng).unwrap();
        assert_eq!(decrypt(&ctx, &sk, &ct).unwrap(), pt);
        let ct2 = encrypt(&ctx, &pk, &pt, &mut rng).unwrap();
        assert_eq!(decrypt(&ctx, &sk, &ct2).unwrap(), pt);
    }

    #[test]
    fn traced_decrypt_matches_plain_and_pads() {
        let ctx = SheContext::new(EncryptionParams::preset(8).unwrap()).unwrap();
        let mut rng = RandomStream::from_u64_seed(5);
        let (sk, pk) = generate_keys(&ctx, &mut rng).unwrap();
        let n = ctx.params().n();
        for round in 0..5u64 {
            let coeffs: Vec<u64> = (0..n)
                .map(|_| rng.uniform_below(ctx.params().t().value()))
                .collect();
            let pt = Plaintext::new(ctx.params(), &coeffs).unwrap();
            let ct = encrypt(&ctx, &pk, &pt, &mut rng).unwrap();
            let mut buf = vec![u64::MAX; n + 1];
            let (trace, result) = trace_capture("decrypt", || {
                let mut out = SecretSliceMut::new(&mut buf);
                decrypt_traced(&ctx, &sk, &ct, &mut out)
            });
            result.unwrap();
            assert_eq!(&buf[..n], pt.coeffs(), "round {round}");
            assert_eq!(buf[n], 0, "pad slot must be zero");
            let stores = trace
                .events
                .iter()
                .filter(|e| matches!(e.op, TraceOp::SecretStore))
                .count();
            assert_eq!(stores, n + 1);
            let rounds = trace
                .events
                .iter()
                .filter(|e| matches!(e.op, TraceOp::RoundDiv))
                .count();
            assert_eq!(rounds, n);
        }
    }

    #[test]
    fn traced_decrypt_rejects_bad_buffer() {
        let ctx = SheContext::new(EncryptionParams::preset(8).unwrap()).unwrap();
        let mut rng = RandomStream::from_u64_seed(6);
        let (sk, pk) = generate_keys(&ctx, &mut rng).unwrap();
        let pt = Plaintext::constant(ctx.params(), 1).unwrap();
        let ct = encrypt(&ctx, &pk, &pt, &mut rng).unwrap();
        let mut buf = vec![0u64; ctx.params().n()];
        let mut out = SecretSliceMut::new(&mut buf);
        assert!(decrypt_traced(&ctx, &sk, &ct, &mut out).is_err());
    }

    #[test]
    fn decrypt_rejects_foreign_key() {
        let ctx_a = SheContext::new(EncryptionParams::preset(8).unwrap()).unwrap();
        let ctx_b = SheContext::new(EncryptionParams::preset(1024).unwrap()).unwrap();
        let mut rng = RandomStream::from_u64_seed(7);
        let (_sk_a, pk_a) = generate_keys(&ctx_a, &mut rng).unwrap();
        let (sk_b, _) = generate_keys(&ctx_b, &mut rng).unwrap();
        let pt = Plaintext::constant(ctx_a.params(), 2).unwrap();
        let ct = encrypt(&ctx_a, &pk_a, &pt, &mut rng).unwrap();
        assert!(decrypt(&ctx_b, &sk_b, &ct).is_err());
        assert!(decrypt(&ctx_a, &sk_b, &ct).is_err());
    }
}
