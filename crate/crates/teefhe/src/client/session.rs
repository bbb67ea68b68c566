//! Budget-tracked homomorphic execution.
//!
//! An [`EvalSession`] is a register machine over ciphertexts. Every
//! operation:
//!
//! 1. **guards its operands** — if an operand's estimated budget cannot
//!    pay the operation's cost, the session reports it for refresh first
//!    (or aborts with a budget error when no refresh channel is attached);
//! 2. **applies the estimator** to derive the result's budget estimate;
//! 3. **reports the result** — a noise report with the caller-supplied
//!    next-cost hint goes to the channel, and an admitted register is
//!    serialized, shipped, replaced by the refreshed ciphertext, and its
//!    estimate reset to the fresh symmetric level.
//!
//! The estimate is a certified lower bound on the true budget, so a
//! session that never sees an estimate of zero never decrypts garbage.

use std::collections::HashMap;
use std::sync::Arc;

use crate::enclave::Enclave;
use crate::error::{Error, Result};
use crate::ring::RandomStream;
use crate::sched::{evaluate_policy, Decision, NoiseReport, PolicyConfig};
use crate::she::{
    add, add_plain, decrypt, deserialize_ciphertext_for, encrypt, encrypt_symmetric, multiply,
    multiply_plain, negate, relinearize, serialize_ciphertext, BudgetEstimator, Ciphertext,
    EvalKeys, EvalOp, Plaintext, PublicKey, SecretKey, SheContext,
};

/// Handle to a session register.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Reg(usize);

/// Destination of noise reports and refresh requests.
///
/// Implemented by [`LocalRefresh`] (policy + enclave in process) and by
/// [`super::link::ServerLink`] (the TCP client).
pub trait RefreshChannel {
    /// Submits a noise report, returning the admission decision.
    fn report(&mut self, report: NoiseReport) -> Result<Decision>;
    /// Ships a serialized ciphertext for refresh; returns the refreshed bytes.
    fn refresh(&mut self, ct: &[u8]) -> Result<Vec<u8>>;
}

/// An in-process refresh channel: admission policy plus enclave, no
/// network. Used by tests, the offline examples, and the benchmark.
pub struct LocalRefresh {
    enclave: Arc<Enclave>,
    client_id: [u8; 16],
    policy: PolicyConfig,
    queue_len: usize,
}

impl LocalRefresh {
    /// Opens a session on `enclave` and provisions parameters and keys for
    /// `client_id`, returning a ready channel. The eager threshold is half
    /// the fresh budget, mirroring the server default.
    pub fn provision(
        enclave: Arc<Enclave>,
        client_id: [u8; 16],
        ctx: &SheContext,
        sk: &SecretKey,
        pk: &PublicKey,
        rng: &mut RandomStream,
    ) -> Result<Self> {
        let mut channel_key = [0u8; 32];
        rng.fill_bytes(&mut channel_key);
        enclave.open_session(client_id, channel_key);
        enclave.configure_para(&client_id, &crate::she::serialize_params(ctx.params()))?;
        let (nonce, sealed) =
            super::link::seal_key_pair(ctx.params(), sk, pk, &channel_key, &client_id, 0);
        enclave.set_key(&client_id, &nonce, &sealed)?;
        let fresh = enclave.fresh_budget(&client_id)?;
        Ok(LocalRefresh {
            enclave,
            client_id,
            policy: PolicyConfig::new(1, fresh / 2),
            queue_len: 0,
        })
    }

    /// Pretends the scheduler queue currently holds `len` tasks, which
    /// suppresses eager admissions once the queue looks full. Lets tests
    /// and demos exercise the mandatory-only regime.
    pub fn set_queue_len(&mut self, len: usize) {
        self.queue_len = len;
    }
}

impl RefreshChannel for LocalRefresh {
    fn report(&mut self, report: NoiseReport) -> Result<Decision> {
        Ok(evaluate_policy(report, self.queue_len, &self.policy))
    }

    fn refresh(&mut self, ct: &[u8]) -> Result<Vec<u8>> {
        self.enclave.decrease_noise(&self.client_id, ct)
    }
}

struct Tracked {
    ct: Ciphertext,
    est: u32,
}

/// A register machine executing homomorphic operations with budget
/// tracking and refresh negotiation.
pub struct EvalSession<'c> {
    ctx: &'c SheContext,
    pk: &'c PublicKey,
    evk: &'c EvalKeys,
    estimator: &'c BudgetEstimator,
    channel: Option<Box<dyn RefreshChannel + 'c>>,
    rng: RandomStream,
    regs: HashMap<usize, Tracked>,
    next_reg: usize,
    instr_count: u64,
    mul_count: u64,
    bootstrap_count: u64,
    estimator_resets: u64,
}

impl<'c> EvalSession<'c> {
    /// Creates a session. With `channel = None` the session runs offline
    /// and aborts when any budget estimate would reach zero.
    pub fn new(
        ctx: &'c SheContext,
        pk: &'c PublicKey,
        evk: &'c EvalKeys,
        estimator: &'c BudgetEstimator,
        channel: Option<Box<dyn RefreshChannel + 'c>>,
        rng: RandomStream,
    ) -> Self {
        EvalSession {
            ctx,
            pk,
            evk,
            estimator,
            channel,
            rng,
            regs: HashMap::new(),
            next_reg: 0,
            instr_count: 0,
            mul_count: 0,
            bootstrap_count: 0,
            estimator_resets: 0,
        }
    }

    fn insert(&mut self, ct: Ciphertext, est: u32) -> Reg {
        let id = self.next_reg;
        self.next_reg += 1;
        self.regs.insert(id, Tracked { ct, est });
        Reg(id)
    }

    fn tracked(&self, r: Reg) -> Result<&Tracked> {
        self.regs
            .get(&r.0)
            .ok_or_else(|| Error::InvalidOperand("unknown register".into()))
    }

    /// The current budget estimate for a register.
    pub fn estimate(&self, r: Reg) -> Result<u32> {
        Ok(self.tracked(r)?.est)
    }

    /// The ciphertext behind a register.
    pub fn ciphertext(&self, r: Reg) -> Result<&Ciphertext> {
        Ok(&self.tracked(r)?.ct)
    }

    /// Releases a register so long-running sessions do not accumulate dead
    /// ciphertexts. Unknown handles are ignored.
    pub fn free(&mut self, r: Reg) {
        self.regs.remove(&r.0);
    }

    /// Completed refreshes (each resets one register's estimate).
    pub fn bootstrap_count(&self) -> u64 {
        self.bootstrap_count
    }

    /// Estimator resets performed; equals the bootstrap count.
    pub fn estimator_resets(&self) -> u64 {
        self.estimator_resets
    }

    /// Instructions executed.
    pub fn instr_count(&self) -> u64 {
        self.instr_count
    }

    /// Ciphertext-by-ciphertext multiplications executed.
    pub fn mul_count(&self) -> u64 {
        self.mul_count
    }

    /// Serializes, ships, and replaces a register's ciphertext; resets its
    /// estimate to the fresh symmetric level.
    fn refresh_register(&mut self, r: Reg) -> Result<()> {
        let bytes = {
            let tracked = self.tracked(r)?;
            serialize_ciphertext(self.ctx.params(), &tracked.ct)?
        };
        let channel = self
            .channel
            .as_mut()
            .expect("refresh_register requires a channel");
        let refreshed = channel.refresh(&bytes)?;
        let ct = deserialize_ciphertext_for(self.ctx, &refreshed)?;
        let tracked = self.regs.get_mut(&r.0).expect("register exists");
        tracked.ct = ct;
        tracked.est = self.estimator.fresh_symmetric_budget();
        self.bootstrap_count += 1;
        self.estimator_resets += 1;
        Ok(())
    }

    /// Refreshes a register unconditionally, bypassing the policy.
    ///
    /// Exists for the forced-refresh execution mode that pins bootstrap
    /// transparency; normal execution always goes through [`negotiate`]
    /// or the operand guards.
    ///
    /// [`negotiate`]: EvalSession::negotiate
    pub fn force_refresh(&mut self, r: Reg) -> Result<()> {
        if self.channel.is_none() {
            return Err(Error::InvalidOperand(
                "forced refresh requires a refresh channel".into(),
            ));
        }
        self.refresh_register(r)
    }

    /// Reports a register's budget with a next-cost hint; refreshes it if
    /// the decision admits it.
    pub fn negotiate(&mut self, r: Reg, next_cost: u32) -> Result<()> {
        let budget = self.tracked(r)?.est;
        let Some(channel) = self.channel.as_mut() else {
            return Ok(());
        };
        let decision = channel.report(NoiseReport { budget, next_cost })?;
        if decision.admitted() {
            self.refresh_register(r)?;
        }
        Ok(())
    }

    /// Ensures `r` can pay `cost`. A register that cannot is refreshed
    /// through the channel, or the session aborts when offline.
    fn guard(&mut self, r: Reg, cost: u32) -> Result<()> {
        let est = self.tracked(r)?.est;
        if est.saturating_sub(cost) > 0 {
            return Ok(());
        }
        if self.channel.is_none() {
            return Err(Error::BudgetExhausted {
                budget: est,
                needed: cost,
            });
        }
        let decision = self
            .channel
            .as_mut()
            .expect("checked above")
            .report(NoiseReport { budget: est, next_cost: cost })?;
        if !decision.admitted() {
            // The policy's mandatory rule admits exactly this situation, so
            // a deferral here means the policy is misconfigured; computing
            // anyway could produce silent garbage.
            return Err(Error::BudgetExhausted {
                budget: est,
                needed: cost,
            });
        }
        self.refresh_register(r)
    }

    /// Encrypts a constant under the public key into a fresh register.
    pub fn input(&mut self, value: i64, next_cost: u32) -> Result<Reg> {
        let pt = Plaintext::constant(self.ctx.params(), value)?;
        let ct = encrypt(self.ctx, self.pk, &pt, &mut self.rng)?;
        let r = self.insert(ct, self.estimator.fresh_public_budget());
        self.instr_count += 1;
        self.negotiate(r, next_cost)?;
        Ok(r)
    }

    /// Encrypts a constant under the secret key (higher fresh budget).
    pub fn input_symmetric(&mut self, value: i64, sk: &SecretKey, next_cost: u32) -> Result<Reg> {
        let pt = Plaintext::constant(self.ctx.params(), value)?;
        let ct = encrypt_symmetric(self.ctx, sk, &pt, &mut self.rng)?;
        let r = self.insert(ct, self.estimator.fresh_symmetric_budget());
        self.instr_count += 1;
        self.negotiate(r, next_cost)?;
        Ok(r)
    }

    /// `a + b`.
    pub fn add(&mut self, a: Reg, b: Reg, next_cost: u32) -> Result<Reg> {
        let cost = self.estimator.cost(EvalOp::Add);
        self.guard(a, cost)?;
        self.guard(b, cost)?;
        let (ea, eb) = (self.tracked(a)?.est, self.tracked(b)?.est);
        let ct = add(self.ctx, &self.tracked(a)?.ct, &self.tracked(b)?.ct)?;
        let est = self.estimator.apply(&[ea, eb], EvalOp::Add);
        let r = self.insert(ct, est);
        self.instr_count += 1;
        self.negotiate(r, next_cost)?;
        Ok(r)
    }

    /// `a * b`; both inputs must be compact (relinearized).
    pub fn mul(&mut self, a: Reg, b: Reg, next_cost: u32) -> Result<Reg> {
        let cost = self.estimator.cost(EvalOp::Multiply);
        self.guard(a, cost)?;
        self.guard(b, cost)?;
        let (ea, eb) = (self.tracked(a)?.est, self.tracked(b)?.est);
        let ct = multiply(self.ctx, &self.tracked(a)?.ct, &self.tracked(b)?.ct)?;
        let est = self.estimator.apply(&[ea, eb], EvalOp::Multiply);
        let r = self.insert(ct, est);
        self.instr_count += 1;
        self.mul_count += 1;
        self.negotiate(r, next_cost)?;
        Ok(r)
    }

    /// Relinearizes `r` in place; a no-op on already-compact registers.
    ///
    /// A refresh triggered by the guard compacts the register as a side
    /// effect (the enclave re-encrypts to two parts), in which case there
    /// is nothing left to relinearize.
    pub fn relin(&mut self, r: Reg, next_cost: u32) -> Result<()> {
        self.instr_count += 1;
        if self.tracked(r)?.ct.size() > 2 {
            let cost = self.estimator.cost(EvalOp::Relinearize);
            self.guard(r, cost)?;
            if self.tracked(r)?.ct.size() > 2 {
                let est = self.tracked(r)?.est;
                let ct = relinearize(self.ctx, self.evk, &self.tracked(r)?.ct)?;
                let tracked = self.regs.get_mut(&r.0).expect("register exists");
                tracked.ct = ct;
                tracked.est = self.estimator.apply(&[est], EvalOp::Relinearize);
            }
        }
        self.negotiate(r, next_cost)?;
        Ok(())
    }

    /// `a + value`.
    pub fn add_plain(&mut self, a: Reg, value: i64, next_cost: u32) -> Result<Reg> {
        let cost = self.estimator.cost(EvalOp::AddPlain);
        self.guard(a, cost)?;
        let ea = self.tracked(a)?.est;
        let pt = Plaintext::constant(self.ctx.params(), value)?;
        let ct = add_plain(self.ctx, &self.tracked(a)?.ct, &pt)?;
        let est = self.estimator.apply(&[ea], EvalOp::AddPlain);
        let r = self.insert(ct, est);
        self.instr_count += 1;
        self.negotiate(r, next_cost)?;
        Ok(r)
    }

    /// `a * value` for a non-zero constant.
    pub fn mul_plain(&mut self, a: Reg, value: i64, next_cost: u32) -> Result<Reg> {
        let op = EvalOp::MultiplyPlain {
            l1_norm: value.unsigned_abs().max(1),
        };
        let cost = self.estimator.cost(op);
        self.guard(a, cost)?;
        let ea = self.tracked(a)?.est;
        let pt = Plaintext::constant(self.ctx.params(), value)?;
        let ct = multiply_plain(self.ctx, &self.tracked(a)?.ct, &pt)?;
        let est = self.estimator.apply(&[ea], op);
        let r = self.insert(ct, est);
        self.instr_count += 1;
        self.negotiate(r, next_cost)?;
        Ok(r)
    }

    /// `-a`.
    pub fn neg(&mut self, a: Reg, next_cost: u32) -> Result<Reg> {
        let cost = self.estimator.cost(EvalOp::Negate);
        self.guard(a, cost)?;
        let ea = self.tracked(a)?.est;
        let ct = negate(self.ctx, &self.tracked(a)?.ct)?;
        let est = self.estimator.apply(&[ea], EvalOp::Negate);
        let r = self.insert(ct, est);
        self.instr_count += 1;
        self.negotiate(r, next_cost)?;
        Ok(r)
    }

    /// Decrypts a register and returns its full plaintext.
    pub fn output_plaintext(&mut self, r: Reg, sk: &SecretKey) -> Result<Plaintext> {
        if self.tracked(r)?.est == 0 {
            return Err(Error::BudgetExhausted {
                budget: 0,
                needed: 1,
            });
        }
        self.instr_count += 1;
        decrypt(self.ctx, sk, &self.tracked(r)?.ct)
    }

    /// Decrypts a register as a centered scalar.
    pub fn output(&mut self, r: Reg, sk: &SecretKey) -> Result<i64> {
        Ok(self.output_plaintext(r, sk)?.constant_value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::she::{generate_eval_keys, generate_keys, noise_budget_exact, EncryptionParams};

    fn setup(
        n: usize,
    ) -> (SheContext, SecretKey, PublicKey, EvalKeys, BudgetEstimator, RandomStream) {
        let params = EncryptionParams::preset(n).unwrap();
        let ctx = SheContext::new(params).unwrap();
        let mut rng = RandomStream::from_u64_seed(2024);
        let (sk, pk) = generate_keys(&ctx, &mut rng).unwrap();
        let evk = generate_eval_keys(&ctx, &mut rng, &sk).unwrap();
        let est = BudgetEstimator::calibrate(&ctx, &mut rng).unwrap();
        (ctx, sk, pk, evk, est, rng)
    }

    #[test]
    fn offline_arithmetic_matches_scalars() {
        let (ctx, sk, pk, evk, est, rng) = setup(1024);
        let mut s = EvalSession::new(&ctx, &pk, &evk, &est, None, rng);
        let a = s.input(7, 0).unwrap();
        let b = s.input(-3, 0).unwrap();
        let sum = s.add(a, b, 0).unwrap();
        let prod = s.mul(sum, sum, 0).unwrap();
        s.relin(prod, 0).unwrap();
        let shifted = s.add_plain(prod, 5, 0).unwrap();
        let scaled = s.mul_plain(shifted, -2, 0).unwrap();
        let out = s.neg(scaled, 0).unwrap();
        // ((7-3)^2 + 5) * -2 = -42, negated = 42
        assert_eq!(s.output(out, &sk).unwrap(), 42);
        assert_eq!(s.bootstrap_count(), 0);
        assert_eq!(s.instr_count(), 9);
        assert_eq!(s.mul_count(), 1);
    }

    #[test]
    fn offline_exhaustion_aborts_rather_than_corrupting() {
        let (ctx, sk, pk, evk, est, rng) = setup(1024);
        let mut s = EvalSession::new(&ctx, &pk, &evk, &est, None, rng);
        let mut acc = s.input(2, 0).unwrap();
        let mut failed = false;
        for _ in 0..30 {
            let step = s.mul(acc, acc, 0).and_then(|sq| {
                s.relin(sq, 0)?;
                Ok(sq)
            });
            match step {
                Ok(sq) => {
                    acc = sq;
                    // every intermediate stays decryptable and sound
                    assert!(
                        noise_budget_exact(&ctx, &sk, s.ciphertext(acc).unwrap()).unwrap()
                            >= s.estimate(acc).unwrap()
                    );
                }
                Err(Error::BudgetExhausted { .. }) => {
                    failed = true;
                    break;
                }
                Err(other) => panic!("unexpected error {other}"),
            }
        }
        assert!(failed, "squaring chain must exhaust the budget offline");
    }

    #[test]
    fn refresh_channel_sustains_deep_chains() {
        let (ctx, sk, pk, evk, est, mut rng) = setup(1024);
        let enclave = Arc::new(Enclave::new());
        let channel =
            LocalRefresh::provision(Arc::clone(&enclave), [9; 16], &ctx, &sk, &pk, &mut rng)
                .unwrap();
        let mut s = EvalSession::new(&ctx, &pk, &evk, &est, Some(Box::new(channel)), rng);
        // x = 2 mod 257? t = 256 for n=1024; use x = 3, square 8 times:
        // value follows 3^(2^k) mod 256 while budgets stay positive
        let mut acc = s.input(3, 0).unwrap();
        let mut expect = 3u64;
        let t = ctx.params().t().value();
        for _ in 0..8 {
            let before = s.bootstrap_count();
            let sq = s.mul(acc, acc, 0).unwrap();
            s.relin(sq, 0).unwrap();
            acc = sq;
            expect = expect * expect % t;
            let true_budget = noise_budget_exact(&ctx, &sk, s.ciphertext(acc).unwrap()).unwrap();
            assert!(true_budget >= s.estimate(acc).unwrap());
            // one squaring step guards one operand (aliased twice) and may
            // refresh eagerly after the multiply and the relinearization:
            // never more than three refreshes, and never a double-guard
            assert!(s.bootstrap_count() - before <= 3);
        }
        let got = s.output(acc, &sk).unwrap();
        let centered = if expect * 2 > t { expect as i64 - t as i64 } else { expect as i64 };
        assert_eq!(got, centered);
        assert!(s.bootstrap_count() > 0, "depth 8 must trigger refreshes");
        assert_eq!(s.bootstrap_count(), s.estimator_resets());
    }

    #[test]
    fn mandatory_guard_alone_sustains_the_chain() {
        // a full-looking queue suppresses eager admissions, so only the
        // mandatory pre-operation guard keeps the chain alive
        let (ctx, sk, pk, evk, est, mut rng) = setup(1024);
        let enclave = Arc::new(Enclave::new());
        let mut channel =
            LocalRefresh::provision(Arc::clone(&enclave), [10; 16], &ctx, &sk, &pk, &mut rng)
                .unwrap();
        channel.set_queue_len(usize::MAX);
        let mut s = EvalSession::new(&ctx, &pk, &evk, &est, Some(Box::new(channel)), rng);
        let mut acc = s.input(1, 0).unwrap();
        for _ in 0..12 {
            let before = s.bootstrap_count();
            let sq = s.mul(acc, acc, 0).unwrap();
            s.relin(sq, 0).unwrap();
            acc = sq;
            assert!(s.estimate(acc).unwrap() > 0, "estimate never reaches zero");
            // with eager admissions suppressed, a squaring step refreshes
            // its aliased operand at most once
            assert!(s.bootstrap_count() - before <= 1);
        }
        assert!(s.bootstrap_count() > 0, "the guard must have fired");
        assert_eq!(s.output(acc, &sk).unwrap(), 1);
    }
}
