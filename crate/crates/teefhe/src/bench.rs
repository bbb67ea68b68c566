//! Single-threaded primitive-operation timing.
//!
//! [`run_benchmarks`] times the six primitive operations — encryption,
//! decryption, addition, multiplication, relinearization, and the
//! enclave's recrypt path — over one or more parameter presets, on the
//! monotonic clock, and reports mean/median/95th-percentile nanoseconds
//! per operation as CSV. Inputs are prepared outside the timed region;
//! only the operation under test is measured.

use std::hint::black_box;
use std::sync::Arc;
use std::time::Instant;

use crate::enclave::Enclave;
use crate::error::{Error, Result};
use crate::ring::RandomStream;
use crate::she::{
    add, decrypt, encrypt, generate_eval_keys, generate_keys, multiply, relinearize,
    serialize_ciphertext, EncryptionParams, Plaintext, SheContext,
};

/// The six operations measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchOp {
    /// Public-key encryption of a constant.
    Encryption,
    /// Decryption of a compact ciphertext.
    Decryption,
    /// Ciphertext addition.
    Addition,
    /// Ciphertext tensor multiplication (no relinearization).
    Multiplication,
    /// Relinearization of a three-part product.
    Relinearization,
    /// Enclave recrypt: deserialize, decrypt, re-encrypt, serialize.
    Recrypt,
}

impl BenchOp {
    /// Every operation, in report order.
    pub const ALL: [BenchOp; 6] = [
        BenchOp::Encryption,
        BenchOp::Decryption,
        BenchOp::Addition,
        BenchOp::Multiplication,
        BenchOp::Relinearization,
        BenchOp::Recrypt,
    ];

    /// The CSV name.
    pub fn name(self) -> &'static str {
        match self {
            BenchOp::Encryption => "encryption",
            BenchOp::Decryption => "decryption",
            BenchOp::Addition => "addition",
            BenchOp::Multiplication => "multiplication",
            BenchOp::Relinearization => "relinearization",
            BenchOp::Recrypt => "recrypt-bootstrap",
        }
    }
}

/// Timing summary of one operation at one parameter set.
#[derive(Clone, Copy, Debug)]
pub struct BenchRow {
    /// Operation measured.
    pub op: BenchOp,
    /// Ring degree.
    pub n: usize,
    /// Ciphertext-modulus size in bits.
    pub q_bits: u32,
    /// Mean nanoseconds per call.
    pub mean_ns: u64,
    /// Median nanoseconds per call.
    pub median_ns: u64,
    /// 95th-percentile nanoseconds per call.
    pub p95_ns: u64,
    /// Number of timed calls.
    pub trials: usize,
}

/// All rows of a benchmark run, with CSV export.
#[derive(Clone, Debug, Default)]
pub struct BenchSuite {
    rows: Vec<BenchRow>,
}

impl BenchSuite {
    /// Every row, preset-major then op order.
    pub fn rows(&self) -> &[BenchRow] {
        &self.rows
    }

    /// The row for one op/degree pair.
    pub fn row(&self, op: BenchOp, n: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.op == op && r.n == n)
    }

    /// Renders the whole suite as CSV.
    pub fn csv(&self) -> String {
        let mut out = String::from("op,n,q_bits,mean_ns,median_ns,p95_ns,trials\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.op.name(),
                r.n,
                r.q_bits,
                r.mean_ns,
                r.median_ns,
                r.p95_ns,
                r.trials
            ));
        }
        out
    }
}

fn summarize(op: BenchOp, n: usize, q_bits: u32, mut samples: Vec<u64>) -> BenchRow {
    let trials = samples.len();
    let mean = (samples.iter().map(|&s| s as u128).sum::<u128>() / trials as u128) as u64;
    samples.sort_unstable();
    let rank = |pct: f64| -> u64 {
        let idx = ((pct / 100.0) * trials as f64).ceil() as usize;
        samples[idx.clamp(1, trials) - 1]
    };
    BenchRow {
        op,
        n,
        q_bits,
        mean_ns: mean,
        median_ns: rank(50.0),
        p95_ns: rank(95.0),
        trials,
    }
}

fn time_trials(trials: usize, mut f: impl FnMut()) -> Vec<u64> {
    // one untimed warm-up call settles caches and lazy tables
    f();
    (0..trials)
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed().as_nanos() as u64
        })
        .collect()
}

/// Benchmarks all six operations at one preset degree.
pub fn bench_preset(n: usize, trials: usize, seed: u64) -> Result<Vec<BenchRow>> {
    if trials == 0 {
        return Err(Error::InvalidParameters("trials must be positive".into()));
    }
    let params = EncryptionParams::preset(n)?;
    let q_bits = params.q().bits();
    let ctx = SheContext::new(params)?;
    let mut rng = RandomStream::from_u64_seed(seed);
    let (sk, pk) = generate_keys(&ctx, &mut rng)?;
    let evk = generate_eval_keys(&ctx, &mut rng, &sk)?;

    let pt = Plaintext::constant(ctx.params(), 7)?;
    let ct_a = encrypt(&ctx, &pk, &pt, &mut rng)?;
    let ct_b = encrypt(&ctx, &pk, &pt, &mut rng)?;
    let ct_wide = multiply(&ctx, &ct_a, &ct_b)?;

    // a provisioned enclave session for the recrypt path
    let enclave = Arc::new(Enclave::new());
    let client_id = [0xBE; 16];
    let mut channel_key = [0u8; 32];
    rng.fill_bytes(&mut channel_key);
    enclave.open_session(client_id, channel_key);
    enclave.configure_para(&client_id, &crate::she::serialize_params(ctx.params()))?;
    let (nonce, sealed) =
        crate::client::link::seal_key_pair(ctx.params(), &sk, &pk, &channel_key, &client_id, 0);
    enclave.set_key(&client_id, &nonce, &sealed)?;
    let ct_bytes = serialize_ciphertext(ctx.params(), &ct_a)?;

    let mut rows = Vec::with_capacity(BenchOp::ALL.len());
    for op in BenchOp::ALL {
        let samples = match op {
            BenchOp::Encryption => time_trials(trials, || {
                black_box(encrypt(&ctx, &pk, &pt, &mut rng).expect("encrypts"));
            }),
            BenchOp::Decryption => time_trials(trials, || {
                black_box(decrypt(&ctx, &sk, &ct_a).expect("decrypts"));
            }),
            BenchOp::Addition => time_trials(trials, || {
                black_box(add(&ctx, &ct_a, &ct_b).expect("adds"));
            }),
            BenchOp::Multiplication => time_trials(trials, || {
                black_box(multiply(&ctx, &ct_a, &ct_b).expect("multiplies"));
            }),
            BenchOp::Relinearization => time_trials(trials, || {
                black_box(relinearize(&ctx, &evk, &ct_wide).expect("relinearizes"));
            }),
            BenchOp::Recrypt => time_trials(trials, || {
                black_box(
                    enclave
                        .decrease_noise(&client_id, &ct_bytes)
                        .expect("recrypts"),
                );
            }),
        };
        rows.push(summarize(op, n, q_bits, samples));
    }
    Ok(rows)
}

/// Benchmarks every requested preset degree; rows are preset-major.
pub fn run_benchmarks(degrees: &[usize], trials: usize, seed: u64) -> Result<BenchSuite> {
    let mut suite = BenchSuite::default();
    for &n in degrees {
        suite.rows.extend(bench_preset(n, trials, seed)?);
    }
    Ok(suite)
}
