//! Logistic regression trained on encrypted data, checked against the
//! identical training loop run in the clear.
//!
//! Per record, the client evaluates the gradient's residual homomorphically
//! (a cubic polynomial stands in for the sigmoid), decrypts only that
//! scalar, and applies the weight update with exact rational arithmetic.
//! Both trainers share one integer recurrence, so their fixed-point weights
//! must agree bit for bit — any drift means the encrypted circuit computed
//! something else.
//!
//! This example uses a small dataset to stay quick; `teefhe lr-demo` runs
//! the full 500-record, 5-covariate shape.
//!
//! Run with: `cargo run --example lr_demo`

use std::sync::Arc;

use teefhe::client::lr::{self, lr_params};
use teefhe::client::{lr_train_encrypted, lr_train_plain, synth_dataset, LocalRefresh, LrConfig};
use teefhe::enclave::Enclave;
use teefhe::ring::RandomStream;
use teefhe::she::{generate_eval_keys, generate_keys, BudgetEstimator, SheContext};
use teefhe::Result;

fn main() -> Result<()> {
    let records = 40;
    let dims = 3;
    let dataset = synth_dataset(31, records, dims);
    let cfg = LrConfig { iterations: 2, ..LrConfig::default() };
    println!("dataset: {records} records, {dims} binary covariates, {} passes", cfg.iterations);

    // The training circuit is sized for this parameter set's plaintext
    // modulus; the residual fits comfortably inside it.
    let params = lr_params()?;
    let ctx = SheContext::new(params)?;
    let mut rng = RandomStream::from_u64_seed(32);
    let (sk, pk) = generate_keys(&ctx, &mut rng)?;
    let evk = generate_eval_keys(&ctx, &mut rng, &sk)?;
    let estimator = BudgetEstimator::calibrate(&ctx, &mut RandomStream::from_u64_seed(33))?;

    let enclave = Arc::new(Enclave::with_rng(RandomStream::from_u64_seed(34)));
    let refresh = LocalRefresh::provision(enclave, [3u8; 16], &ctx, &sk, &pk, &mut rng)?;

    let wh_plain = lr_train_plain(&dataset, &cfg);
    let (wh_enc, report) = lr_train_encrypted(
        &dataset,
        &cfg,
        &ctx,
        &sk,
        &pk,
        &evk,
        &estimator,
        Some(Box::new(refresh)),
        RandomStream::from_u64_seed(35),
    )?;

    println!("weight    plaintext   encrypted   (fixed-point, scale {})", lr::WH_SCALE);
    for (i, (p, e)) in wh_plain.iter().zip(&wh_enc).enumerate() {
        println!("w[{i}]     {p:>9}   {e:>9}");
    }

    let w = lr::wh_to_weights(&wh_enc);
    println!(
        "log-loss {:.4} (coin-flipping would be {:.4})",
        lr::log_loss(&dataset, &w),
        (2.0f64).ln()
    );
    println!(
        "{} homomorphic instructions, {} multiplications, {} refreshes, {:.1} s",
        report.instr_count,
        report.mul_count,
        report.bootstrap_count,
        report.wall_ns as f64 / 1e9
    );

    assert_eq!(wh_plain, wh_enc, "the trainers must agree exactly");
    println!("encrypted and plaintext weights agree exactly");
    Ok(())
}
