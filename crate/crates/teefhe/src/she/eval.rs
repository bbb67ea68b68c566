//! Homomorphic evaluation: addition, negation, plaintext mixing,
//! multiplication, and relinearization.

use crate::error::{Error, Result};
use crate::ring::{negacyclic_convolve_i128, Poly};

use super::ciphertext::Ciphertext;
use super::context::SheContext;
use super::encode::Plaintext;
use super::keys::EvalKeys;

fn check_pair(ctx: &SheContext, a: &Ciphertext, b: &Ciphertext) -> Result<()> {
    let id = ctx.params().params_id();
    if a.params_id() != id || b.params_id() != id {
        return Err(Error::ParameterMismatch(
            "ciphertext belongs to a different parameter set".into(),
        ));
    }
    Ok(())
}

fn check_plain(ctx: &SheContext, a: &Ciphertext, pt: &Plaintext) -> Result<()> {
    let id = ctx.params().params_id();
    if a.params_id() != id || pt.params_id() != id {
        return Err(Error::ParameterMismatch(
            "ciphertext or plaintext belongs to a different parameter set".into(),
        ));
    }
    Ok(())
}

/// Adds two ciphertexts of equal size, part-wise.
pub fn add(ctx: &SheContext, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    check_pair(ctx, a, b)?;
    if a.size() != b.size() {
        return Err(Error::InvalidParameters(format!(
            "cannot add ciphertexts of sizes {} and {}",
            a.size(),
            b.size()
        )));
    }
    let parts: Result<Vec<Poly>> = a
        .parts()
        .iter()
        .zip(b.parts())
        .map(|(pa, pb)| pa.add(pb))
        .collect();
    Ciphertext::from_parts(a.params_id(), parts?)
}

/// Negates a ciphertext, part-wise.
pub fn negate(ctx: &SheContext, a: &Ciphertext) -> Result<Ciphertext> {
    check_pair(ctx, a, a)?;
    let parts: Vec<Poly> = a.parts().iter().map(Poly::negate).collect();
    Ciphertext::from_parts(a.params_id(), parts)
}

/// Adds a plaintext to a ciphertext by shifting part 0 by `Δ·m`.
pub fn add_plain(ctx: &SheContext, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
    check_plain(ctx, a, pt)?;
    let params = ctx.params();
    let q = params.q();
    let delta = params.scaling_factor();
    let embedded: Vec<u64> = pt.coeffs().iter().map(|&m| q.mul_mod(delta, m)).collect();
    let shift = Poly::from_coeffs(embedded, q);
    let mut parts = a.parts().to_vec();
    parts[0] = parts[0].add(&shift)?;
    Ciphertext::from_parts(a.params_id(), parts)
}

/// Multiplies a ciphertext by a non-zero plaintext.
///
/// The plaintext is lifted to `q` in centered form, so small negative
/// constants scale the noise by their magnitude rather than by `t`.
/// Multiplying by zero is rejected: it collapses the ciphertext to a
/// trivial encryption of zero, which is never what a circuit author wants
/// and would confuse noise accounting.
pub fn multiply_plain(ctx: &SheContext, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
    check_plain(ctx, a, pt)?;
    if pt.is_zero() {
        return Err(Error::InvalidParameters(
            "refusing to multiply by the zero plaintext".into(),
        ));
    }
    let q = ctx.params().q();
    let lifted = Poly::from_signed(&pt.centered(), q);
    let parts: Result<Vec<Poly>> = a
        .parts()
        .iter()
        .map(|p| ctx.tables().mul(p, &lifted))
        .collect();
    Ciphertext::from_parts(a.params_id(), parts?)
}

/// Multiplies two size-2 ciphertexts, producing a size-3 ciphertext.
///
/// The tensor parts are computed over the integers in centered form and
/// rescaled by `t/q` with half-up rounding:
/// `out_i = ⌊t·x_i/q⌉ mod q` for each tensor coefficient `x_i`.
pub fn multiply(ctx: &SheContext, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    check_pair(ctx, a, b)?;
    if a.size() != 2 || b.size() != 2 {
        return Err(Error::InvalidParameters(format!(
            "multiplication needs size-2 inputs, got {} and {}; relinearize first",
            a.size(),
            b.size()
        )));
    }
    let params = ctx.params();
    let n = params.n() as u128;
    let q = params.q();
    let t = params.t().value();
    // Guard the widest intermediate: the middle tensor part is computed
    // Karatsuba-style from sums of centered parts, so coefficients reach
    // 4·n·(q/2)² and the accumulator must stay inside i128.
    let half_q = (q.value() / 2) as u128;
    if n.checked_mul(half_q)
        .and_then(|v| v.checked_mul(half_q))
        .map(|v| v > (1u128 << 124))
        .unwrap_or(true)
    {
        return Err(Error::InvalidParameters(
            "parameter set too large for exact tensor multiplication".into(),
        ));
    }

    let a0 = a.part(0).centered();
    let a1 = a.part(1).centered();
    let b0 = b.part(0).centered();
    let b1 = b.part(1).centered();

    // Tensor: (a0·b0, a0·b1 + a1·b0, a1·b1) over the integers, with the
    // middle part recovered from one extra convolution of part sums.
    let t00 = negacyclic_convolve_i128(&a0, &b0);
    let t11 = negacyclic_convolve_i128(&a1, &b1);
    let a_sum: Vec<i64> = a0.iter().zip(&a1).map(|(x, y)| x + y).collect();
    let b_sum: Vec<i64> = b0.iter().zip(&b1).map(|(x, y)| x + y).collect();
    let cross = negacyclic_convolve_i128(&a_sum, &b_sum);
    let mid: Vec<i128> = cross
        .iter()
        .zip(&t00)
        .zip(&t11)
        .map(|((c, x), y)| c - x - y)
        .collect();

    let rescale = |acc: &[i128]| -> Result<Poly> {
        let qv = q.value() as i128;
        let coeffs: Vec<u64> = acc
            .iter()
            .map(|&x| {
                // ⌊t·x/q⌉ = t·h + ⌊t·r/q⌉ where x = h·q + r, 0 ≤ r < q.
                let h = x.div_euclid(qv);
                let r = x.rem_euclid(qv) as u128;
                let rounded = ((t as u128 * r + q.value() as u128 / 2) / q.value() as u128) as i128;
                let out = (t as i128 * h + rounded).rem_euclid(qv);
                out as u64
            })
            .collect();
        Ok(Poly::from_coeffs(coeffs, q))
    };

    Ciphertext::from_parts(
        a.params_id(),
        vec![rescale(&t00)?, rescale(&mid)?, rescale(&t11)?],
    )
}

/// Relinearizes a size-3 ciphertext back to size 2 using the evaluation
/// keys: part 2 is decomposed into base-`2^w` digits and folded through the
/// key pairs.
pub fn relinearize(ctx: &SheContext, evk: &EvalKeys, ct: &Ciphertext) -> Result<Ciphertext> {
    let id = ctx.params().params_id();
    if ct.params_id() != id || evk.params_id() != id {
        return Err(Error::ParameterMismatch(
            "ciphertext or evaluation keys belong to a different parameter set".into(),
        ));
    }
    if ct.size() != 3 {
        return Err(Error::InvalidParameters(format!(
            "relinearization needs a size-3 ciphertext, got size {}",
            ct.size()
        )));
    }
    let params = ctx.params();
    if evk.digit_count() != params.digit_count() || evk.window() != params.relin_window() {
        return Err(Error::ParameterMismatch(
            "evaluation keys decompose a different modulus shape".into(),
        ));
    }
    let q = params.q();
    let w = params.relin_window() as u32;
    let mask = (1u64 << w) - 1;
    let c2 = ct.part(2);
    let mut c0 = ct.part(0).clone();
    let mut c1 = ct.part(1).clone();
    for (j, (evk0, evk1)) in evk.pairs().iter().enumerate() {
        let digits: Vec<u64> = c2
            .coeffs()
            .iter()
            .map(|&c| (c >> (j as u32 * w)) & mask)
            .collect();
        let digit_poly = Poly::from_coeffs(digits, q);
        c0 = c0.add(&ctx.tables().mul(evk0, &digit_poly)?)?;
        c1 = c1.add(&ctx.tables().mul(evk1, &digit_poly)?)?;
    }
    Ciphertext::from_parts(id, vec![c0, c1])
}
