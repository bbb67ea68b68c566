//! Encrypted logistic-regression training.
//!
//! The demo trains a small logistic model by gradient ascent. The expensive
//! part of each step — the per-record residual `y - sigmoid(w . x)` — is
//! computed homomorphically on encrypted weights, using the cubic sigmoid
//! approximation from [`super::sigmoid`]. The weight update itself runs on
//! the client, which owns the secret key anyway: rescaling by the learning
//! rate needs divisions this ciphertext algebra cannot express at desk
//! scale, so the split is residuals under encryption, bookkeeping in the
//! clear.
//!
//! Everything is fixed-point integer arithmetic, and the plain trainer in
//! [`lr_train_plain`] replays the exact circuit in scalar integers: both
//! trainers share one rounding rule and one update rule, so their weight
//! trajectories are expected to agree bit for bit.
//!
//! # Fixed-point layout
//!
//! - High-precision weights `wh` at scale 2^10 (client-side accumulator).
//! - Circuit weights `wq = round(wh / 256)` at scale 4. The scale 4 is
//!   forced by the output scale: with sigmoid coefficients quantised at
//!   2^13 (linear) and 2^9 (cubic), both `4 * 2^13` and `4^3 * 2^9` equal
//!   the output scale 2^15, so the linear and cubic terms line up.
//! - Labels enter as `(y - 1/2) * 2^15 = ±16384`.
//!
//! With at most 5 active covariates and `|wq| <= 6`, the running sum stays
//! within `|u| <= 32`, every intermediate stays below half the plaintext
//! modulus 2^17, and decryption recovers the exact signed integers.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::ring::RandomStream;
use crate::she::{
    BudgetEstimator, EncryptionParams, EvalKeys, EvalOp, PublicKey, SecretKey, SheContext,
};

use super::session::{EvalSession, RefreshChannel, Reg};
use super::sigmoid::logistic;

/// Plaintext modulus the training circuit is sized for.
pub const LR_PLAINTEXT_MODULUS: u64 = 1 << 17;
/// Scale of the client-side high-precision weight accumulator.
pub const WH_SCALE: i64 = 1 << 10;
/// Scale of the quantised weights that enter the circuit.
pub const WQ_SCALE: i64 = 4;
/// Scale of the circuit output (residuals and labels).
pub const OUT_SCALE: i64 = 1 << 15;
/// Linear sigmoid coefficient at scale 2^13.
pub const C1Q: i64 = 1230;
/// Cubic sigmoid coefficient at scale 2^9.
pub const C3Q: i64 = -1;

/// Encryption parameters sized for the training circuit: degree 2048 with a
/// 56-bit modulus and plaintext space 2^17.
pub fn lr_params() -> Result<EncryptionParams> {
    EncryptionParams::with_prime_search(
        2048,
        56,
        LR_PLAINTEXT_MODULUS,
        LR_PLAINTEXT_MODULUS,
        3.2,
        20,
        16,
    )
}

/// Rounded division with half-away-from-zero ties; `den > 0`.
///
/// Both trainers route every rescaling step through this one function, so
/// they round identically.
pub fn round_div(num: i64, den: i64) -> i64 {
    debug_assert!(den > 0);
    if num >= 0 {
        (num + den / 2) / den
    } else {
        (num - den / 2) / den
    }
}

/// Training hyper-parameters. The learning rate is an exact rational so
/// both trainers apply it identically.
#[derive(Clone, Copy, Debug)]
pub struct LrConfig {
    /// Gradient-ascent passes over the data.
    pub iterations: usize,
    /// Learning-rate numerator.
    pub eta_num: i64,
    /// Learning-rate denominator (positive).
    pub eta_den: i64,
}

impl Default for LrConfig {
    fn default() -> Self {
        LrConfig { iterations: 3, eta_num: 1, eta_den: 2 }
    }
}

/// A binary-covariate, binary-label dataset.
#[derive(Clone, Debug)]
pub struct LrDataset {
    /// Covariate rows; each entry is 0 or 1.
    pub x: Vec<Vec<u8>>,
    /// Labels, 0 or 1.
    pub y: Vec<u8>,
    /// Real-valued weights the labels were sampled from (empty for
    /// hand-built datasets).
    pub planted: Vec<f64>,
}

impl LrDataset {
    /// Builds a dataset from explicit rows, validating shape and range.
    pub fn from_parts(x: Vec<Vec<u8>>, y: Vec<u8>) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(Error::InvalidParameters(
                "dataset needs one label per covariate row".into(),
            ));
        }
        let dims = x[0].len();
        if dims == 0 || x.iter().any(|row| row.len() != dims) {
            return Err(Error::InvalidParameters(
                "covariate rows must share one positive width".into(),
            ));
        }
        if x.iter().flatten().any(|&v| v > 1) || y.iter().any(|&v| v > 1) {
            return Err(Error::InvalidParameters(
                "covariates and labels must be 0 or 1".into(),
            ));
        }
        Ok(LrDataset { x, y, planted: Vec::new() })
    }

    /// Number of records.
    pub fn len(&self) -> usize {
        self.y.len()
    }

    /// True when there are no records.
    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Number of covariates per record.
    pub fn dims(&self) -> usize {
        self.x[0].len()
    }

    /// Indices of the active covariates in record `i`.
    fn selected(&self, i: usize) -> Vec<usize> {
        (0..self.dims()).filter(|&j| self.x[i][j] == 1).collect()
    }
}

/// Samples a reproducible synthetic dataset: covariates are fair coin
/// flips, weights are planted uniformly in `[-2, 2]`, and each label is a
/// Bernoulli draw with success probability `sigmoid(w . x)`.
pub fn synth_dataset(seed: u64, records: usize, dims: usize) -> LrDataset {
    assert!(records > 0 && dims > 0);
    let mut rng = RandomStream::from_u64_seed(seed);
    let mut unit = || rng.next_word() as f64 / 2.0f64.powi(64);
    let planted: Vec<f64> = (0..dims).map(|_| 4.0 * unit() - 2.0).collect();
    let mut x = Vec::with_capacity(records);
    let mut y = Vec::with_capacity(records);
    for _ in 0..records {
        let row: Vec<u8> = (0..dims).map(|_| (unit() < 0.5) as u8).collect();
        let dot: f64 = row
            .iter()
            .zip(&planted)
            .map(|(&xi, &wi)| xi as f64 * wi)
            .sum();
        y.push((unit() < logistic(dot)) as u8);
        x.push(row);
    }
    LrDataset { x, y, planted }
}

/// Label encoding: `(y - 1/2)
/// * OUT_SCALE`.
fn label_code(y: u8) -> i64 {
    (2 * y as i64 - 1) * (OUT_SCALE / 2)
}

/// One shared weight-update step: converts an accumulated residual sum into
/// a high-precision weight increment.
fn weight_delta(grad_sum: i64, cfg: &LrConfig, records: i64) -> i64 {
    round_div(
        grad_sum * cfg.eta_num * WH_SCALE,
        cfg.eta_den * records * OUT_SCALE,
    )
}

/// Quantises the high-precision weights down to circuit scale.
fn circuit_weights(wh: &[i64]) -> Vec<i64> {
    wh.iter().map(|&w| round_div(w, WH_SCALE / WQ_SCALE)).collect()
}

/// Scalar replay of the residual circuit: the exact integers the encrypted
/// evaluation produces, asserted to stay inside the plaintext range.
fn scalar_residual(wq: &[i64], selected: &[usize], y: u8) -> i64 {
    let u: i64 = selected.iter().map(|&j| wq[j]).sum();
    let half_t = (LR_PLAINTEXT_MODULUS / 2) as i64;
    assert!(
        u.abs() <= 32,
        "weight sum {u} outside the range the circuit is sized for"
    );
    let g = C1Q * u + C3Q * u * u * u;
    let r = label_code(y) - g;
    assert!(g.abs() < half_t && r.abs() < half_t);
    r
}

/// Converts high-precision integer weights to real values.
pub fn wh_to_weights(wh: &[i64]) -> Vec<f64> {
    wh.iter().map(|&w| w as f64 / WH_SCALE as f64).collect()
}

/// Mean negative log-likelihood of the dataset under real-valued weights.
pub fn log_loss(dataset: &LrDataset, weights: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..dataset.len() {
        let dot: f64 = dataset.x[i]
            .iter()
            .zip(weights)
            .map(|(&xi, &wi)| xi as f64 * wi)
            .sum();
        let p = logistic(dot).clamp(1e-12, 1.0 - 1e-12);
        total -= if dataset.y[i] == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    total / dataset.len() as f64
}

/// Trains entirely in the clear, replaying the circuit in scalar integers.
/// Returns the high-precision weights.
pub fn lr_train_plain(dataset: &LrDataset, cfg: &LrConfig) -> Vec<i64> {
    let dims = dataset.dims();
    let records = dataset.len() as i64;
    let mut wh = vec![0i64; dims];
    for _ in 0..cfg.iterations {
        let wq = circuit_weights(&wh);
        let mut grad = vec![0i64; dims];
        for i in 0..dataset.len() {
            let selected = dataset.selected(i);
            if selected.is_empty() {
                continue;
            }
            let r = scalar_residual(&wq, &selected, dataset.y[i]);
            for &j in &selected {
                grad[j] += r;
            }
        }
        for j in 0..dims {
            wh[j] += weight_delta(grad[j], cfg, records);
        }
    }
    wh
}

/// What an encrypted training run did.
#[derive(Clone, Copy, Debug)]
pub struct LrReport {
    /// Records whose residual was evaluated homomorphically.
    pub records: u64,
    /// Homomorphic instructions executed.
    pub instr_count: u64,
    /// Ciphertext-by-ciphertext multiplications.
    pub mul_count: u64,
    /// Completed refreshes.
    pub bootstrap_count: u64,
    /// Wall-clock time for the whole run.
    pub wall_ns: u64,
}

impl LrReport {
    /// The report as a two-line CSV document.
    pub fn csv(&self) -> String {
        format!(
            "records,instr_count,mul_count,bootstrap_count,wall_ns\n{},{},{},{},{}\n",
            self.records, self.instr_count, self.mul_count, self.bootstrap_count, self.wall_ns
        )
    }
}

/// Trains with the residual circuit evaluated under encryption.
///
/// Weights are re-encrypted (symmetrically, for the larger fresh budget) at
/// the start of every pass; each record's circuit is
///
/// ```text
/// u  = sum of selected weights        g  = t1 + t3
/// sq = u * u   (relinearised)         r  = label - g
/// cu = sq * u  (relinearised)
/// t1 = u * C1Q, t3 = cu * C3Q
/// ```
///
/// and the decrypted residuals drive the same clear-text update rule as
/// [`lr_train_plain`], so the two trainers should agree exactly.
#[allow(clippy::too_many_arguments)]
pub fn lr_train_encrypted<'c>(
    dataset: &LrDataset,
    cfg: &LrConfig,
    ctx: &'c SheContext,
    sk: &SecretKey,
    pk: &'c PublicKey,
    evk: &'c EvalKeys,
    estimator: &'c BudgetEstimator,
    channel: Option<Box<dyn RefreshChannel + 'c>>,
    rng: RandomStream,
) -> Result<(Vec<i64>, LrReport)> {
    let t = ctx.params().t().value();
    if t != LR_PLAINTEXT_MODULUS {
        return Err(Error::ParameterMismatch(format!(
            "training circuit is sized for plaintext modulus {LR_PLAINTEXT_MODULUS}, got {t}"
        )));
    }
    let start = Instant::now();
    let dims = dataset.dims();
    let records = dataset.len() as i64;
    let mut session = EvalSession::new(ctx, pk, evk, estimator, channel, rng);

    let add_cost = estimator.cost(EvalOp::Add);
    let mul_cost = estimator.cost(EvalOp::Multiply);
    let relin_cost = estimator.cost(EvalOp::Relinearize);
    let t3_cost = estimator.cost(EvalOp::MultiplyPlain { l1_norm: C3Q.unsigned_abs() });
    let addp_cost = estimator.cost(EvalOp::AddPlain);
    let neg_cost = estimator.cost(EvalOp::Negate);

    let mut wh = vec![0i64; dims];
    let mut evaluated = 0u64;
    for _ in 0..cfg.iterations {
        let wq = circuit_weights(&wh);
        let w_regs: Vec<Reg> = wq
            .iter()
            .map(|&w| session.input_symmetric(w, sk, add_cost))
            .collect::<Result<_>>()?;
        let mut grad = vec![0i64; dims];
        for i in 0..dataset.len() {
            let selected = dataset.selected(i);
            if selected.is_empty() {
                continue;
            }
            let mut temps: Vec<Reg> = Vec::new();
            let mut u = w_regs[selected[0]];
            for (pos, &j) in selected.iter().enumerate().skip(1) {
                let next = if pos + 1 < selected.len() { add_cost } else { mul_cost };
                u = session.add(u, w_regs[j], next)?;
                temps.push(u);
            }
            let sq = session.mul(u, u, relin_cost)?;
            temps.push(sq);
            session.relin(sq, mul_cost)?;
            let cu = session.mul(sq, u, relin_cost)?;
            temps.push(cu);
            session.relin(cu, t3_cost)?;
            let t1 = session.mul_plain(u, C1Q, add_cost)?;
            temps.push(t1);
            let t3 = session.mul_plain(cu, C3Q, add_cost)?;
            temps.push(t3);
            let g = session.add(t1, t3, neg_cost)?;
            temps.push(g);
            let ng = session.neg(g, addp_cost)?;
            temps.push(ng);
            let r = session.add_plain(ng, label_code(dataset.y[i]), 0)?;
            temps.push(r);
            let residual = session.output(r, sk)?;
            for reg in temps {
                session.free(reg);
            }
            evaluated += 1;
            for &j in &selected {
                grad[j] += residual;
            }
        }
        for reg in w_regs {
            session.free(reg);
        }
        for j in 0..dims {
            wh[j] += weight_delta(grad[j], cfg, records);
        }
    }

    let report = LrReport {
        records: evaluated,
        instr_count: session.instr_count(),
        mul_count: session.mul_count(),
        bootstrap_count: session.bootstrap_count(),
        wall_ns: start.elapsed().as_nanos() as u64,
    };
    Ok((wh, report))
}
