//! Noise-budget decay and enclave-assisted refresh.
//!
//! A register is squared repeatedly inside an evaluation session. Each
//! squaring costs a large slice of the noise budget; without help the
//! session would halt after a few steps. A refresh channel backed by an
//! in-process enclave lets the session ship the ciphertext out for
//! decrypt-re-encrypt whenever the admission policy says so, and the
//! budget column below jumps back to the fresh level at those moments.
//!
//! Run with: `cargo run --example noise_refresh`

use std::sync::Arc;

use teefhe::client::{EvalSession, LocalRefresh};
use teefhe::enclave::Enclave;
use teefhe::ring::RandomStream;
use teefhe::she::{
    generate_eval_keys, generate_keys, noise_budget_exact, BudgetEstimator, EncryptionParams,
    EvalOp, SheContext,
};
use teefhe::Result;

fn main() -> Result<()> {
    let params = EncryptionParams::preset(1024)?;
    let ctx = SheContext::new(params.clone())?;
    let mut rng = RandomStream::from_u64_seed(2);
    let (sk, pk) = generate_keys(&ctx, &mut rng)?;
    let evk = generate_eval_keys(&ctx, &mut rng, &sk)?;
    let estimator = BudgetEstimator::calibrate(&ctx, &mut RandomStream::from_u64_seed(3))?;

    println!(
        "fresh budget {} bits; one squaring costs about {} bits",
        estimator.fresh_public_budget(),
        estimator.cost(EvalOp::Multiply) + estimator.cost(EvalOp::Relinearize),
    );

    // The enclave lives in this process; provisioning hands it the secret
    // key sealed under a fresh channel key, exactly as the TCP path does.
    let enclave = Arc::new(Enclave::with_rng(RandomStream::from_u64_seed(4)));
    let refresh = LocalRefresh::provision(Arc::clone(&enclave), [7u8; 16], &ctx, &sk, &pk,
        &mut rng)?;

    let mut session = EvalSession::new(
        &ctx,
        &pk,
        &evk,
        &estimator,
        Some(Box::new(refresh)),
        RandomStream::from_u64_seed(5),
    );

    let t = params.t().value();
    let mul_cost = estimator.cost(EvalOp::Multiply);
    let mut reg = session.input(3, mul_cost)?;
    let mut expect = 3u64;

    println!("step | value (mod {t}) | est bits | exact bits | refreshes so far");
    for step in 1..=12 {
        let squared = session.mul(reg, reg, estimator.cost(EvalOp::Relinearize))?;
        session.relin(squared, mul_cost)?;
        session.free(reg);
        reg = squared;
        expect = expect * expect % t;

        let est = session.estimate(reg)?;
        let exact = noise_budget_exact(&ctx, &sk, session.ciphertext(reg)?)?;
        println!(
            "{step:>4} | {:>15} | {est:>8} | {exact:>10} | {}",
            expect,
            session.bootstrap_count()
        );
        assert!(est <= exact, "the estimate must never promise more than reality");
    }

    // `output` decrypts to a centered scalar; fold it back into [0, t).
    let out = (session.output(reg, &sk)? as i128).rem_euclid(t as i128) as u64;
    assert_eq!(out, expect);
    println!(
        "final value {out} matches the plaintext shadow after {} refreshes",
        session.bootstrap_count()
    );
    Ok(())
}
