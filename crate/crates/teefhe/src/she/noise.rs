//! Noise accounting: the exact key-holder budget measurement and the
//! key-free calibrated estimator that drives refresh scheduling.

use crate::error::{Error, Result};
use crate::ring::{centered, RandomStream};

use super::ciphertext::Ciphertext;
use super::context::SheContext;
use super::decrypt::{decrypt, phase};
use super::encode::Plaintext;
use super::encrypt::{encrypt, encrypt_symmetric};
use super::eval::{add, add_plain, multiply, relinearize};
use super::keys::{generate_eval_keys, generate_keys, SecretKey};

/// Number of probe measurements per operation during calibration.
pub const DEFAULT_PROBES: usize = 50;

/// Safety margin, in bits, applied to calibrated levels and costs.
pub const DEFAULT_MARGIN: u32 = 2;

/// The ∞-norm of a ciphertext's noise term, measured with the secret key.
///
/// The noise is `e = v - Δ·m (mod q)` in centered form, where `v` is the
/// decryption phase and `m` the decrypted message.
pub fn noise_linf(ctx: &SheContext, sk: &SecretKey, ct: &Ciphertext) -> Result<u64> {
    let params = ctx.params();
    let q = params.q();
    let delta = params.scaling_factor();
    let v = phase(ctx, sk, ct)?;
    let m = decrypt(ctx, sk, ct)?;
    let mut max = 0u64;
    for (&vi, &mi) in v.coeffs().iter().zip(m.coeffs()) {
        let e = centered(q.sub_mod(vi, q.mul_mod(delta, mi)), q.value()).unsigned_abs();
        max = max.max(e);
    }
    Ok(max)
}

/// The exact noise budget of a ciphertext, in bits, measured with the
/// secret key.
///
/// With `E = max(‖e‖∞, 1)`, the budget is `⌊log2(q / (2·t·E))⌋`, clamped to
/// zero when the ratio drops below one. A budget of `b` means the noise can
/// grow by a factor `2^b` before threatening correct decryption.
pub fn noise_budget_exact(ctx: &SheContext, sk: &SecretKey, ct: &Ciphertext) -> Result<u32> {
    let params = ctx.params();
    let e = noise_linf(ctx, sk, ct)?.max(1);
    let denom = 2u128 * params.t().value() as u128 * e as u128;
    let ratio = params.q().value() as u128 / denom;
    if ratio >= 1 {
        Ok(127 - ratio.leading_zeros())
    } else {
        Ok(0)
    }
}

/// Operations the estimator can price.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalOp {
    /// Ciphertext + ciphertext.
    Add,
    /// Part-wise negation.
    Negate,
    /// Ciphertext + plaintext.
    AddPlain,
    /// Ciphertext × plaintext with the given ℓ1 norm of the centered
    /// plaintext.
    MultiplyPlain { l1_norm: u64 },
    /// Ciphertext × ciphertext.
    Multiply,
    /// Size-3 → size-2 key switch.
    Relinearize,
}

/// A key-free noise budget estimator, calibrated once per parameter set.
///
/// Calibration generates throwaway keys, measures exact budgets across
/// `DEFAULT_PROBES` probe evaluations per operation, and freezes:
///
/// - fresh floors: the minimum observed fresh budget minus the margin, one
///   floor for public-key encryptions and one for symmetric encryptions
///   (refreshed ciphertexts are symmetric and carry a higher budget);
/// - per-operation costs: the maximum observed budget drop plus the margin.
///
/// Plaintext multiplication is priced analytically instead: the noise
/// scales by at most the ℓ1 norm of the centered plaintext, so its cost is
/// `⌈log2 ℓ1⌉` plus the margin (which also covers the scaling-factor
/// remainder for parameter sets with `q ≡ 1 mod t`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BudgetEstimator {
    params_id: u64,
    fresh_public: u32,
    fresh_symmetric: u32,
    add_cost: u32,
    add_plain_cost: u32,
    multiply_cost: u32,
    relin_cost: u32,
    margin: u32,
}

fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

impl BudgetEstimator {
    /// Calibrates an estimator for the context's parameter set.
    pub fn calibrate(ctx: &SheContext, rng: &mut RandomStream) -> Result<Self> {
        let params = ctx.params();
        let (sk, pk) = generate_keys(ctx, rng)?;
        let evk = generate_eval_keys(ctx, rng, &sk)?;
        let n = params.n();
        let t = params.t().value();
        let random_pt = |rng: &mut RandomStream| -> Result<Plaintext> {
            let coeffs: Vec<u64> = (0..n).map(|_| rng.uniform_below(t)).collect();
            Plaintext::new(params, &coeffs)
        };

        let mut fresh_public = u32::MAX;
        let mut fresh_symmetric = u32::MAX;
        let mut add_drop = 0u32;
        let mut add_plain_drop = 0u32;
        let mut multiply_drop = 0u32;
        let mut relin_drop = 0u32;

        for probe in 0..DEFAULT_PROBES {
            let pt_a = random_pt(rng)?;
            let pt_b = random_pt(rng)?;
            let ct_a = encrypt(ctx, &pk, &pt_a, rng)?;
            let ct_b = encrypt(ctx, &pk, &pt_b, rng)?;
            let b_a = noise_budget_exact(ctx, &sk, &ct_a)?;
            let b_b = noise_budget_exact(ctx, &sk, &ct_b)?;
            fresh_public = fresh_public.min(b_a).min(b_b);

            let ct_sym = encrypt_symmetric(ctx, &sk, &pt_a, rng)?;
            fresh_symmetric = fresh_symmetric.min(noise_budget_exact(ctx, &sk, &ct_sym)?);

            // Addition probes, at fresh depth and on accumulated inputs.
            let sum = add(ctx, &ct_a, &ct_b)?;
            let b_sum = noise_budget_exact(ctx, &sk, &sum)?;
            add_drop = add_drop.max(b_a.min(b_b).saturating_sub(b_sum));
            let sum2 = add(ctx, &sum, &ct_a)?;
            let b_sum2 = noise_budget_exact(ctx, &sk, &sum2)?;
            add_drop = add_drop.max(b_sum.min(b_a).saturating_sub(b_sum2));

            let mixed = add_plain(ctx, &ct_a, &pt_b)?;
            add_plain_drop =
                add_plain_drop.max(b_a.saturating_sub(noise_budget_exact(ctx, &sk, &mixed)?));

            // Multiplication probes alternate between fresh inputs and the
            // noisier accumulated sums to cover several noise depths.
            let (lhs, rhs, b_lhs, b_rhs) = if probe % 2 == 0 {
                (&ct_a, &ct_b, b_a, b_b)
            } else {
                (&sum2, &ct_b, b_sum2, b_b)
            };
            let product = multiply(ctx, lhs, rhs)?;
            let b_product = noise_budget_exact(ctx, &sk, &product)?;
            multiply_drop = multiply_drop.max(b_lhs.min(b_rhs).saturating_sub(b_product));

            let folded = relinearize(ctx, &evk, &product)?;
            relin_drop =
                relin_drop.max(b_product.saturating_sub(noise_budget_exact(ctx, &sk, &folded)?));
        }

        let margin = DEFAULT_MARGIN;
        if fresh_public <= margin || fresh_symmetric <= margin {
            return Err(Error::InvalidParameters(
                "parameter set leaves no fresh budget after the calibration margin".into(),
            ));
        }
        Ok(Self {
            params_id: params.params_id(),
            fresh_public: fresh_public - margin,
            fresh_symmetric: fresh_symmetric - margin,
            add_cost: add_drop + margin,
            add_plain_cost: add_plain_drop + margin,
            multiply_cost: multiply_drop + margin,
            relin_cost: relin_drop + margin,
            margin,
        })
    }

    /// Identity of the parameter set this estimator was calibrated for.
    pub fn params_id(&self) -> u64 {
        self.params_id
    }

    /// Conservative budget of a fresh public-key encryption.
    pub fn fresh_public_budget(&self) -> u32 {
        self.fresh_public
    }

    /// Conservative budget of a fresh symmetric encryption — the level a
    /// refreshed ciphertext resets to.
    pub fn fresh_symmetric_budget(&self) -> u32 {
        self.fresh_symmetric
    }

    /// The calibration margin, in bits.
    pub fn margin(&self) -> u32 {
        self.margin
    }

    /// Conservative budget cost of one operation, in bits.
    pub fn cost(&self, op: EvalOp) -> u32 {
        match op {
            EvalOp::Add => self.add_cost,
            EvalOp::Negate => 0,
            EvalOp::AddPlain => self.add_plain_cost,
            EvalOp::MultiplyPlain { l1_norm } => ceil_log2(l1_norm.max(1)) + self.margin,
            EvalOp::Multiply => self.multiply_cost,
            EvalOp::Relinearize => self.relin_cost,
        }
    }

    /// Applies an operation to tracked estimates: the output estimate is the
    /// smallest input estimate minus the operation cost, floored at zero.
    pub fn apply(&self, inputs: &[u32], op: EvalOp) -> u32 {
        let floor = inputs.iter().copied().min().unwrap_or(0);
        floor.saturating_sub(self.cost(op))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::Modulus;
    use crate::she::eval::multiply_plain;
    use crate::she::params::EncryptionParams;

    #[test]
    fn frozen_budget_example() {
        // Smallest prime ≥ 2^20 congruent to 1 mod 256: a noiseless
        // ciphertext has E = 1, so the budget is ⌊log2(1049089/512)⌋ = 11.
        let q = crate::ring::modulus::smallest_prime_congruent(1 << 20, 256).unwrap();
        assert_eq!(q.value(), 1_049_089);
        let t = Modulus::new(256).unwrap();
        let params = EncryptionParams::new(8, q, t, 0.0, 0, 16).unwrap();
        let ctx = SheContext::new(params).unwrap();
        let mut rng = RandomStream::from_u64_seed(31);
        let (sk, _) = generate_keys(&ctx, &mut rng).unwrap();
        let pt = Plaintext::new(ctx.params(), &[5, 0, 3]).unwrap();
        let ct = encrypt_symmetric(&ctx, &sk, &pt, &mut rng).unwrap();
        assert_eq!(noise_linf(&ctx, &sk, &ct).unwrap(), 0);
        assert_eq!(noise_budget_exact(&ctx, &sk, &ct).unwrap(), 11);
    }

    #[test]
    fn budget_shrinks_monotonically_under_ops() {
        let ctx = SheContext::new(EncryptionParams::preset(1024).unwrap()).unwrap();
        let mut rng = RandomStream::from_u64_seed(32);
        let (sk, pk) = generate_keys(&ctx, &mut rng).unwrap();
        let pt = Plaintext::constant(ctx.params(), 3).unwrap();
        let ct = encrypt(&ctx, &pk, &pt, &mut rng).unwrap();
        let b0 = noise_budget_exact(&ctx, &sk, &ct).unwrap();
        assert!(b0 > 20, "fresh budget {b0} unexpectedly small");
        let sum = add(&ctx, &ct, &ct).unwrap();
        let b1 = noise_budget_exact(&ctx, &sk, &sum).unwrap();
        assert!(b1 <= b0);
        let product = multiply(&ctx, &ct, &ct).unwrap();
        let b2 = noise_budget_exact(&ctx, &sk, &product).unwrap();
        assert!(b2 < b1, "multiplication must cost budget ({b2} vs {b1})");
    }

    #[test]
    fn estimator_calibrates_and_prices_sanely() {
        let ctx = SheContext::new(EncryptionParams::preset(1024).unwrap()).unwrap();
        let mut rng = RandomStream::from_u64_seed(33);
        let est = BudgetEstimator::calibrate(&ctx, &mut rng).unwrap();
        assert_eq!(est.params_id(), ctx.params().params_id());
        assert!(est.fresh_public_budget() > 20);
        // Symmetric encryptions carry one error term instead of three, so
        // their floor is at least the public floor.
        assert!(est.fresh_symmetric_budget() >= est.fresh_public_budget());
        assert!(est.cost(EvalOp::Multiply) > est.cost(EvalOp::Add));
        assert!(est.cost(EvalOp::Multiply) < est.fresh_symmetric_budget());
        assert_eq!(est.cost(EvalOp::Negate), 0);
        // Analytic plaintext-multiplication pricing.
        assert_eq!(
            est.cost(EvalOp::MultiplyPlain { l1_norm: 1 }),
            est.margin()
        );
        assert_eq!(
            est.cost(EvalOp::MultiplyPlain { l1_norm: 1024 }),
            10 + est.margin()
        );
        assert_eq!(
            est.cost(EvalOp::MultiplyPlain { l1_norm: 1230 }),
            11 + est.margin()
        );
        // apply() floors at zero.
        assert_eq!(est.apply(&[3], EvalOp::Multiply), 0);
        let b = est.apply(&[30, 25], EvalOp::Add);
        assert_eq!(b, 25 - est.cost(EvalOp::Add));
    }

    #[test]
    fn estimates_stay_conservative_along_a_program() {
        let ctx = SheContext::new(EncryptionParams::preset(1024).unwrap()).unwrap();
        let mut rng = RandomStream::from_u64_seed(34);
        let est = BudgetEstimator::calibrate(&ctx, &mut rng).unwrap();
        let (sk, pk) = generate_keys(&ctx, &mut rng).unwrap();
        let evk = generate_eval_keys(&ctx, &mut rng, &sk).unwrap();
        let n = ctx.params().n();
        let t = ctx.params().t().value();

        // Walk a random program; at every step the tracked estimate must
        // lower-bound the exact measured budget.
        for trial in 0..5u64 {
            let coeffs: Vec<u64> = (0..n).map(|_| rng.uniform_below(t)).collect();
            let pt = Plaintext::new(ctx.params(), &coeffs).unwrap();
            let mut ct = encrypt(&ctx, &pk, &pt, &mut rng).unwrap();
            let mut tracked = est.fresh_public_budget();
            assert!(tracked <= noise_budget_exact(&ctx, &sk, &ct).unwrap());
            for step in 0..12u64 {
                let choice = (trial * 31 + step * 7) % 4;
                let (next, next_tracked) = match choice {
                    0 => {
                        let other = encrypt(&ctx, &pk, &pt, &mut rng).unwrap();
                        (
                            add(&ctx, &ct, &other).unwrap(),
                            est.apply(&[tracked, est.fresh_public_budget()], EvalOp::Add),
                        )
                    }
                    1 => (
                        add_plain(&ctx, &ct, &pt).unwrap(),
                        est.apply(&[tracked], EvalOp::AddPlain),
                    ),
                    2 => {
                        let c = Plaintext::constant(ctx.params(), 7).unwrap();
                        (
                            multiply_plain(&ctx, &ct, &c).unwrap(),
                            est.apply(&[tracked], EvalOp::MultiplyPlain { l1_norm: 7 }),
                        )
                    }
                    _ => {
                        if tracked <= est.cost(EvalOp::Multiply) + est.cost(EvalOp::Relinearize) {
                            continue;
                        }
                        let other = encrypt(&ctx, &pk, &pt, &mut rng).unwrap();
                        let prod = multiply(&ctx, &ct, &other).unwrap();
                        let folded = relinearize(&ctx, &evk, &prod).unwrap();
                        let mid =
                            est.apply(&[tracked, est.fresh_public_budget()], EvalOp::Multiply);
                        (folded, est.apply(&[mid], EvalOp::Relinearize))
                    }
                };
                if next_tracked == 0 {
                    break;
                }
                ct = next;
                tracked = next_tracked;
                let exact = noise_budget_exact(&ctx, &sk, &ct).unwrap();
                assert!(
                    tracked <= exact,
                    "trial {trial} step {step}: estimate {tracked} exceeds exact {exact}"
                );
            }
        }
    }
}
