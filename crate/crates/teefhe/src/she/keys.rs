//! Key material: ternary secret keys, public encryption keys, and
//! relinearization (evaluation) keys.

use crate::error::{Error, Result};
use crate::ring::{Poly, RandomStream};

use super::context::SheContext;

/// A ternary secret key: each coefficient of `s` is in `{-1, 0, 1}`,
/// represented over `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecretKey {
    params_id: u64,
    s: Poly,
}

impl SecretKey {
    pub(crate) fn from_poly(params_id: u64, s: Poly) -> Self {
        Self { params_id, s }
    }

    /// Identity of the parameter set this key belongs to.
    pub fn params_id(&self) -> u64 {
        self.params_id
    }

    pub(crate) fn poly(&self) -> &Poly {
        &self.s
    }
}

/// A public encryption key: `pk0 = -(a·s + e)`, `pk1 = a` for uniform `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicKey {
    params_id: u64,
    pk0: Poly,
    pk1: Poly,
}

impl PublicKey {
    pub(crate) fn from_polys(params_id: u64, pk0: Poly, pk1: Poly) -> Self {
        Self { params_id, pk0, pk1 }
    }

    /// Identity of the parameter set this key belongs to.
    pub fn params_id(&self) -> u64 {
        self.params_id
    }

    pub(crate) fn pk0(&self) -> &Poly {
        &self.pk0
    }

    pub(crate) fn pk1(&self) -> &Poly {
        &self.pk1
    }
}

/// Relinearization keys: for each base-`2^w` digit position `j`, the pair
/// `(evk0_j, evk1_j) = (-(a_j·s + e_j) + 2^{jw}·s², a_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalKeys {
    params_id: u64,
    window: u8,
    pairs: Vec<(Poly, Poly)>,
}

impl EvalKeys {
    pub(crate) fn from_pairs(params_id: u64, window: u8, pairs: Vec<(Poly, Poly)>) -> Self {
        Self { params_id, window, pairs }
    }

    /// Identity of the parameter set these keys belong to.
    pub fn params_id(&self) -> u64 {
        self.params_id
    }

    /// Decomposition window, in bits.
    pub fn window(&self) -> u8 {
        self.window
    }

    /// Number of digit positions covered.
    pub fn digit_count(&self) -> usize {
        self.pairs.len()
    }

    pub(crate) fn pairs(&self) -> &[(Poly, Poly)] {
        &self.pairs
    }
}

/// Samples a fresh secret key and matching public key.
pub fn generate_keys(ctx: &SheContext, rng: &mut RandomStream) -> Result<(SecretKey, PublicKey)> {
    let params = ctx.params();
    let (n, q) = (params.n(), params.q());
    let id = params.params_id();
    let s = rng.ternary_poly(n, q);
    let a = rng.uniform_poly(n, q);
    let e = rng.error_poly(n, q, params.noise_width(), params.noise_clip());
    // pk0 = -(a·s + e)
    let a_s = ctx.tables().mul(&a, &s)?;
    let pk0 = a_s.add(&e)?.negate();
    Ok((
        SecretKey::from_poly(id, s),
        PublicKey::from_polys(id, pk0, a),
    ))
}

/// Builds relinearization keys for the given secret key.
pub fn generate_eval_keys(
    ctx: &SheContext,
    rng: &mut RandomStream,
    sk: &SecretKey,
) -> Result<EvalKeys> {
    let params = ctx.params();
    if sk.params_id() != params.params_id() {
        return Err(Error::ParameterMismatch(
            "secret key belongs to a different parameter set".into(),
        ));
    }
    let (n, q) = (params.n(), params.q());
    let w = params.relin_window() as u32;
    let digits = params.digit_count();
    let s2 = ctx.tables().mul(sk.poly(), sk.poly())?;
    let mut pairs = Vec::with_capacity(digits);
    for j in 0..digits {
        let a_j = rng.uniform_poly(n, q);
        let e_j = rng.error_poly(n, q, params.noise_width(), params.noise_clip());
        // evk0_j = -(a_j·s + e_j) + 2^{jw}·s²
        let shift = q.reduce(1u64 << (j as u32 * w));
        let a_s = ctx.tables().mul(&a_j, sk.poly())?;
        let evk0 = a_s.add(&e_j)?.negate().add(&s2.scalar_mul(shift))?;
        pairs.push((evk0, a_j));
    }
    Ok(EvalKeys::from_pairs(params.params_id(), params.relin_window(), pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::centered;
    use crate::she::params::EncryptionParams;

    fn ctx(n: usize) -> SheContext {
        SheContext::new(EncryptionParams::preset(n).unwrap()).unwrap()
    }

    #[test]
    fn secret_key_is_ternary() {
        let ctx = ctx(1024);
        let mut rng = RandomStream::from_u64_seed(7);
        let (sk, _) = generate_keys(&ctx, &mut rng).unwrap();
        let q = ctx.params().q();
        for &c in sk.poly().coeffs() {
            assert!(c == 0 || c == 1 || c == q.value() - 1, "coefficient {c}");
        }
        // All three values should actually appear at this degree.
        for target in [0, 1, q.value() - 1] {
            assert!(sk.poly().coeffs().iter().any(|&c| c == target));
        }
    }

    #[test]
    fn public_key_residual_is_small() {
        let ctx = ctx(1024);
        let mut rng = RandomStream::from_u64_seed(8);
        let (sk, pk) = generate_keys(&ctx, &mut rng).unwrap();
        // pk0 + pk1·s = -e, which must stay within the sampler clip bound.
        let residual = pk
            .pk0()
            .add(&ctx.tables().mul(pk.pk1(), sk.poly()).unwrap())
            .unwrap();
        let clip = ctx.params().noise_clip() as i64;
        let q = ctx.params().q();
        let max = residual
            .coeffs()
            .iter()
            .map(|&c| centered(c, q.value()).abs())
            .max()
            .unwrap();
        assert!(max <= clip, "residual {max} exceeds clip {clip}");
        assert!(max > 0, "zero residual would mean no error was added");
    }

    #[test]
    fn eval_key_residuals_reveal_shifted_squares() {
        let ctx = ctx(1024);
        let mut rng = RandomStream::from_u64_seed(9);
        let (sk, _) = generate_keys(&ctx, &mut rng).unwrap();
        let evk = generate_eval_keys(&ctx, &mut rng, &sk).unwrap();
        assert_eq!(evk.digit_count(), ctx.params().digit_count());
        assert_eq!(evk.window(), ctx.params().relin_window());
        let q = ctx.params().q();
        let s2 = ctx.tables().mul(sk.poly(), sk.poly()).unwrap();
        let w = ctx.params().relin_window() as u32;
        let clip = ctx.params().noise_clip() as i64;
        for (j, (evk0, evk1)) in evk.pairs().iter().enumerate() {
            // evk0_j + evk1_j·s - 2^{jw}·s² = -e_j
            let shift = q.reduce(1u64 << (j as u32 * w));
            let lhs = evk0
                .add(&ctx.tables().mul(evk1, sk.poly()).unwrap())
                .unwrap()
                .sub(&s2.scalar_mul(shift))
                .unwrap();
            let max = lhs
                .coeffs()
                .iter()
                .map(|&c| centered(c, q.value()).abs())
                .max()
                .unwrap();
            assert!(max <= clip, "digit {j} residual {max} exceeds clip {clip}");
        }
    }

    #[test]
    fn keygen_is_seed_deterministic() {
        let ctx = ctx(8);
        let mut rng_a = RandomStream::from_u64_seed(42);
        let mut rng_b = RandomStream::from_u64_seed(42);
        let (sk_a, pk_a) = generate_keys(&ctx, &mut rng_a).unwrap();
        let (sk_b, pk_b) = generate_keys(&ctx, &mut rng_b).unwrap();
        assert_eq!(sk_a, sk_b);
        assert_eq!(pk_a, pk_b);
        let evk_a = generate_eval_keys(&ctx, &mut rng_a, &sk_a).unwrap();
        let evk_b = generate_eval_keys(&ctx, &mut rng_b, &sk_b).unwrap();
        assert_eq!(evk_a, evk_b);
        // A different seed produces different keys.
        let mut rng_c = RandomStream::from_u64_seed(43);
        let (sk_c, _) = generate_keys(&ctx, &mut rng_c).unwrap();
        assert_ne!(sk_a, sk_c);
    }

    #[test]
    fn eval_keys_reject_foreign_secret() {
        let ctx_a = ctx(8);
        let ctx_b = ctx(1024);
        let mut rng = RandomStream::from_u64_seed(1);
        let (sk_a, _) = generate_keys(&ctx_a, &mut rng).unwrap();
        assert!(generate_eval_keys(&ctx_b, &mut rng, &sk_a).is_err());
    }
}
