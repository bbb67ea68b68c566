//! Side-channel audit: execution traces of the secret-touching code paths
//! must be identical no matter what the secrets are.
//!
//! Every operation that touches key or message material is built on a
//! traced word layer. Capturing the layer's event stream while the inputs
//! vary — and diffing the streams — is the desk-scale stand-in for a
//! hardware side-channel lab. Deliberately leaky twin implementations act
//! as negative controls proving the audit can actually catch a leak.
//!
//! Run with: `cargo run --example trace_audit`

use std::sync::Arc;

use teefhe::enclave::Enclave;
use teefhe::ring::ct::{exponentiate_uint_mod_leaky, leaky_conditional_move};
use teefhe::ring::{
    conditional_move, exponentiate_uint_mod, trace_capture, trace_equal, Modulus, RandomStream,
};
use teefhe::she::{
    encrypt, generate_keys, multiply, serialize_ciphertext, EncryptionParams, Plaintext,
    SheContext,
};
use teefhe::Result;

fn main() -> Result<()> {
    let mut rng = RandomStream::from_u64_seed(10);
    let q = Modulus::new(0x1FFF_FFFF_FFE0_0001)?;

    // --- constant-time primitives across 100 random secret inputs -------
    let mut exp_traces = Vec::new();
    let mut cmov_traces = Vec::new();
    for _ in 0..100 {
        let base = rng.uniform_mod(q);
        let exponent = rng.uniform_below(1 << 40);
        let (trace, _) = trace_capture("exp", || exponentiate_uint_mod(base, exponent, q));
        exp_traces.push(trace);

        let src: Vec<u64> = (0..32).map(|_| rng.next_word()).collect();
        let mut dst: Vec<u64> = (0..32).map(|_| rng.next_word()).collect();
        let cond = rng.uniform_below(2);
        let (trace, _) = trace_capture("cmov", || conditional_move(&src, &mut dst, 32, cond));
        cmov_traces.push(trace);
    }
    for traces in [&exp_traces, &cmov_traces] {
        assert!(
            traces.windows(2).all(|w| trace_equal(&w[0], &w[1])),
            "a constant-time primitive leaked through its trace"
        );
    }
    println!(
        "exponentiation: {} events/run, identical across 100 secret inputs",
        exp_traces[0].events.len()
    );
    println!(
        "conditional move: {} events/run, identical across 100 secret inputs",
        cmov_traces[0].events.len()
    );

    // --- the enclave's decrypt-re-encrypt path --------------------------
    // Two enclaves provisioned with *different* secret keys refresh
    // ciphertexts of *different* messages; the traces still match.
    let params = EncryptionParams::preset(8)?;
    let ctx = SheContext::new(params.clone())?;
    let mut refresh_traces = Vec::new();
    for secret_seed in 0..50u64 {
        let mut krng = RandomStream::from_u64_seed(1000 + secret_seed);
        let (sk, pk) = generate_keys(&ctx, &mut krng)?;
        let enclave = Arc::new(Enclave::with_rng(RandomStream::from_u64_seed(77)));
        let client = [secret_seed as u8; 16];
        enclave.open_session(client, [0x5Au8; 32]);
        enclave.configure_para(&client, &teefhe::she::serialize_params(&params))?;
        let (nonce, sealed) =
            teefhe::client::link::seal_key_pair(&params, &sk, &pk, &[0x5Au8; 32], &client, 0);
        enclave.set_key(&client, &nonce, &sealed)?;

        let value = krng.uniform_below(params.t().value());
        let pt = Plaintext::new(&params, &[value])?;
        let ct = encrypt(&ctx, &pk, &pt, &mut krng)?;
        let noisy = multiply(&ctx, &ct, &ct)?;
        let bytes = serialize_ciphertext(&params, &noisy)?;
        let (trace, refreshed) =
            trace_capture("refresh", || enclave.decrease_noise(&client, &bytes));
        refreshed?;
        refresh_traces.push(trace);
    }
    assert!(
        refresh_traces.windows(2).all(|w| trace_equal(&w[0], &w[1])),
        "the refresh path leaked through its trace"
    );
    println!(
        "enclave refresh: {} events/run, identical across 50 keys and messages",
        refresh_traces[0].events.len()
    );

    // --- negative controls: the audit catches real leaks ----------------
    let (leak_a, _) = trace_capture("leak", || exponentiate_uint_mod_leaky(3, 5, q));
    let (leak_b, _) = trace_capture("leak", || exponentiate_uint_mod_leaky(3, 200, q));
    assert!(!trace_equal(&leak_a, &leak_b), "leaky exponentiation evaded the audit");

    let src = vec![1u64; 8];
    let mut dst = vec![0u64; 8];
    let (skip, _) = trace_capture("leak", || leaky_conditional_move(&src, &mut dst, 8, 0));
    let (take, _) = trace_capture("leak", || leaky_conditional_move(&src, &mut dst, 8, 1));
    assert!(!trace_equal(&skip, &take), "leaky conditional move evaded the audit");
    println!("negative controls: both leaky twins were caught by trace comparison");
    Ok(())
}
