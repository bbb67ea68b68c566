//! Client and refresh server talking over real TCP, end to end: pinned-
//! measurement handshake, sealed key provisioning, and a program run whose
//! refreshes are negotiated per operation over the wire.
//!
//! Everything the client sends after the handshake is sealed with the
//! session key, and every frame has a fixed layout — the frame log printed
//! after provisioning shows the byte lengths an eavesdropper would see,
//! none of which depend on the key or message values.
//!
//! Run with: `cargo run --example server_client`

use std::sync::Arc;

use teefhe::client::{run_program, HomomorphicProgram, RunOptions, ServerLink};
use teefhe::enclave::Enclave;
use teefhe::proto::ClientId;
use teefhe::ring::RandomStream;
use teefhe::sched::SchedulerConfig;
use teefhe::server::{start_server, ServerConfig};
use teefhe::she::{
    generate_eval_keys, generate_keys, BudgetEstimator, EncryptionParams, SheContext,
};
use teefhe::Result;

const PROGRAM: &str = "
    INPUT  x 6        # enc(6)
    INPUT  y 11       # enc(11)
    MUL    p x y      # 66
    RELIN  p
    MUL    q p p      # 4356
    RELIN  q
    ADDP   r q 14     # 4370
    OUTPUT r
";

fn main() -> Result<()> {
    // Server side: enclave + scheduler behind an ephemeral localhost port.
    let enclave = Arc::new(Enclave::with_rng(RandomStream::from_u64_seed(20)));
    let server = start_server(
        enclave,
        ServerConfig {
            scheduler: SchedulerConfig { pool_size: 2, ..SchedulerConfig::default() },
            seed: Some(21),
        },
    )?;
    println!("server listening on {}", server.addr());

    // Client side: keys never leave this scope unsealed.
    let params = EncryptionParams::preset(2048)?;
    let ctx = SheContext::new(params.clone())?;
    let mut rng = RandomStream::from_u64_seed(22);
    let (sk, pk) = generate_keys(&ctx, &mut rng)?;
    let evk = generate_eval_keys(&ctx, &mut rng, &sk)?;
    let estimator = BudgetEstimator::calibrate(&ctx, &mut RandomStream::from_u64_seed(23))?;

    // The handshake aborts unless the server proves the expected enclave
    // measurement, so provisioning can't be tricked onto an impostor.
    let mut link = ServerLink::connect(
        &server.addr(),
        ClientId::from_u128(99),
        &Enclave::measurement(),
        &mut rng,
    )?;
    link.provision(&params, &sk, &pk)?;
    println!("handshake + provisioning done for client {}", link.client_id());
    println!("wire traffic so far (direction, frame type, payload bytes):");
    for entry in link.frame_log() {
        println!(
            "  {:?} type {:#04x} {:>6} bytes",
            entry.direction, entry.msg_type, entry.payload_len
        );
    }

    let program = HomomorphicProgram::parse(PROGRAM)?;
    let (outputs, report) = run_program(
        &program,
        &ctx,
        &pk,
        &evk,
        &estimator,
        &sk,
        Some(Box::new(link)),
        RunOptions::default(),
        RandomStream::from_u64_seed(24),
    )?;

    for (name, value) in &outputs {
        println!("output {name} = {value}");
    }
    assert_eq!(outputs[0].1, (6 * 11) * (6 * 11) + 14);
    println!(
        "{} instructions, {} ciphertext multiplications, {} refreshes over the wire",
        report.instr_count, report.mul_count, report.bootstrap_count
    );

    let stats = server.stats();
    if let Some(mean) = stats.mean_wait_ns() {
        println!(
            "server queue: {} refreshes served, mean wait {:.2} ms",
            stats.len(),
            mean / 1e6
        );
    }
    server.shutdown();
    println!("server stopped cleanly");
    Ok(())
}
