//! Command-line front end: key generation, micro-benchmarks, the refresh
//! server, a program-running client, the logistic-regression demo, and the
//! scheduler waiting-time evaluation.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error, 3 self-check
//! failure (lr-demo deviation above tolerance). The environment variable
//! `TEEFHE_SEED` overrides any `--seed` flag.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use teefhe::client::lr::{self, lr_params};
use teefhe::client::{
    lr_train_encrypted, lr_train_plain, run_program, synth_dataset, HomomorphicProgram,
    LocalRefresh, LrConfig, RunOptions, ServerLink,
};
use teefhe::enclave::Enclave;
use teefhe::proto::ClientId;
use teefhe::ring::RandomStream;
use teefhe::sched::{BootstrapService, InjectedDelayRunner, SchedulerConfig};
use teefhe::server::{start_server_on, ServerConfig};
use teefhe::she::{
    deserialize_eval_keys, deserialize_params, deserialize_public_key, deserialize_secret_key,
    generate_eval_keys, generate_keys, params_id_from_envelope, serialize_eval_keys,
    serialize_params, serialize_public_key, serialize_secret_key, BudgetEstimator,
    EncryptionParams, EvalKeys, PublicKey, SecretKey, SheContext,
};
use teefhe::{bench, Result};

#[derive(Parser)]
#[command(
    name = "teefhe",
    about = "Somewhat-homomorphic encryption with enclave-assisted noise refresh",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a key set and write it to a key directory.
    Keygen {
        /// Ring degree (power of two with a built-in preset).
        #[arg(long, default_value_t = 2048)]
        n: usize,
        /// Directory that receives params/secret/public/eval key files.
        #[arg(long)]
        keys: PathBuf,
        /// Seed for deterministic key generation; omitted = OS entropy.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Time the primitive operations and emit one CSV row per (op, n).
    BenchOps {
        /// Bench a single ring degree (overrides --preset).
        #[arg(long)]
        n: Option<usize>,
        /// Comma-separated ring degrees to bench.
        #[arg(long, default_value = "1024,2048,4096")]
        preset: String,
        /// Timed trials per operation (after one warm-up).
        #[arg(long, default_value_t = 30)]
        trials: usize,
        /// Seed for the benchmark workload.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the refresh server: enclave, scheduler, and TCP front end.
    RunServer {
        /// Address to bind.
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Port to bind (0 = ephemeral).
        #[arg(long, default_value_t = 7700)]
        port: u16,
        /// Scheduler worker-pool size.
        #[arg(long, default_value_t = 2)]
        pool: usize,
        /// Seed for per-connection handshake randomness; omitted = entropy.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Execute a homomorphic program file against a running server.
    RunClient {
        /// Server host.
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Server port.
        #[arg(long, default_value_t = 7700)]
        port: u16,
        /// Program file (one instruction per line).
        #[arg(long)]
        program: PathBuf,
        /// Key directory written by keygen.
        #[arg(long)]
        keys: PathBuf,
        /// Seed for client randomness; omitted = OS entropy.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the run-report CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train logistic regression twice — encrypted and in the clear — and
    /// compare the weights. Exits 3 if they deviate beyond tolerance.
    LrDemo {
        /// Gradient-ascent passes over the data.
        #[arg(long, default_value_t = 3)]
        iters: usize,
        /// Seed for data synthesis, keys, and encryption randomness.
        #[arg(long, default_value_t = 11)]
        seed: u64,
        /// Write the training-report CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Drive the scheduler with synthetic clients and report waiting times.
    SchedEval {
        /// Concurrent synthetic clients.
        #[arg(long, default_value_t = 8)]
        clients: usize,
        /// Scheduler worker-pool size.
        #[arg(long, default_value_t = 2)]
        pool: usize,
        /// Sequential refresh requests per client.
        #[arg(long, default_value_t = 4)]
        trials: usize,
        /// Seed for the synthetic payloads.
        #[arg(long, default_value_t = 5)]
        seed: u64,
        /// Write the waiting-time CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version are success paths; everything else is usage.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(dispatch(cli.cmd));
}

fn dispatch(cmd: Cmd) -> i32 {
    let outcome = match cmd {
        Cmd::Keygen { n, keys, seed } => cmd_keygen(n, &keys, effective_seed(seed)),
        Cmd::BenchOps { n, preset, trials, seed, out } => {
            cmd_bench_ops(n, &preset, trials, effective_seed(Some(seed)).unwrap_or(seed), out)
        }
        Cmd::RunServer { host, port, pool, seed } => {
            cmd_run_server(&host, port, pool, effective_seed(seed))
        }
        Cmd::RunClient { host, port, program, keys, seed, out } => {
            cmd_run_client(&host, port, &program, &keys, effective_seed(seed), out)
        }
        Cmd::LrDemo { iters, seed, out } => {
            cmd_lr_demo(iters, effective_seed(Some(seed)).unwrap_or(seed), out)
        }
        Cmd::SchedEval { clients, pool, trials, seed, out } => {
            cmd_sched_eval(clients, pool, trials, effective_seed(Some(seed)).unwrap_or(seed), out)
        }
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// `TEEFHE_SEED` wins over `--seed`; a malformed value is ignored.
fn effective_seed(flag: Option<u64>) -> Option<u64> {
    match std::env::var("TEEFHE_SEED") {
        Ok(v) => v.trim().parse::<u64>().ok().or(flag),
        Err(_) => flag,
    }
}

/// An independent random stream per purpose, so flows stay reproducible
/// even when one stage changes how much randomness it draws.
fn stream(seed: Option<u64>, lane: u64) -> RandomStream {
    match seed {
        Some(s) => {
            RandomStream::from_u64_seed(s.wrapping_add(lane.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
        }
        None => RandomStream::from_entropy(),
    }
}

fn write_or_print(out: Option<&Path>, csv: &str, what: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, csv)?;
            println!("{what} written to {}", path.display());
            Ok(())
        }
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn hex32(bytes: &[u8; 32]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

// ---------------------------------------------------------------- keygen

const PARAMS_FILE: &str = "params.tfhe";
const SECRET_FILE: &str = "secret.tfhe";
const PUBLIC_FILE: &str = "public.tfhe";
const EVAL_FILE: &str = "eval.tfhe";

fn cmd_keygen(n: usize, keys: &Path, seed: Option<u64>) -> Result<i32> {
    let params = EncryptionParams::preset(n)?;
    let ctx = SheContext::new(params.clone())?;
    let mut rng = stream(seed, 0);
    let (sk, pk) = generate_keys(&ctx, &mut rng)?;
    let evk = generate_eval_keys(&ctx, &mut rng, &sk)?;

    fs::create_dir_all(keys)?;
    let files = [
        (PARAMS_FILE, serialize_params(&params)),
        (SECRET_FILE, serialize_secret_key(&params, &sk)?),
        (PUBLIC_FILE, serialize_public_key(&params, &pk)?),
        (EVAL_FILE, serialize_eval_keys(&params, &evk)?),
    ];
    for (name, bytes) in &files {
        fs::write(keys.join(name), bytes)?;
    }

    println!(
        "key set: n = {}, log2(q) ~ {}, t = {}",
        params.n(),
        64 - params.q().value().leading_zeros(),
        params.t().value()
    );
    for (name, bytes) in &files {
        println!("  {} ({} bytes)", keys.join(name).display(), bytes.len());
    }
    Ok(0)
}

/// Loads a key directory and checks all four files describe one parameter
/// set.
fn load_keys(keys: &Path) -> Result<(EncryptionParams, SecretKey, PublicKey, EvalKeys)> {
    let read = |name: &str| -> Result<Vec<u8>> { Ok(fs::read(keys.join(name))?) };
    let params_bytes = read(PARAMS_FILE)?;
    let sk_bytes = read(SECRET_FILE)?;
    let pk_bytes = read(PUBLIC_FILE)?;
    let evk_bytes = read(EVAL_FILE)?;

    let id = params_id_from_envelope(&params_bytes)?;
    for (name, bytes) in
        [(SECRET_FILE, &sk_bytes), (PUBLIC_FILE, &pk_bytes), (EVAL_FILE, &evk_bytes)]
    {
        let other = params_id_from_envelope(bytes)?;
        if other != id {
            return Err(teefhe::Error::ParameterMismatch(format!(
                "{name} belongs to parameter set {other:#018x}, params file is {id:#018x}"
            )));
        }
    }

    Ok((
        deserialize_params(&params_bytes)?,
        deserialize_secret_key(&sk_bytes)?,
        deserialize_public_key(&pk_bytes)?,
        deserialize_eval_keys(&evk_bytes)?,
    ))
}

// ------------------------------------------------------------- bench-ops

fn cmd_bench_ops(
    n: Option<usize>,
    preset: &str,
    trials: usize,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<i32> {
    let degrees: Vec<usize> = match n {
        Some(one) => vec![one],
        None => preset
            .split(',')
            .map(|tok| {
                tok.trim().parse::<usize>().map_err(|_| {
                    teefhe::Error::InvalidParameters(format!("bad ring degree '{tok}' in --preset"))
                })
            })
            .collect::<Result<_>>()?,
    };
    let suite = bench::run_benchmarks(&degrees, trials, seed)?;
    write_or_print(out.as_deref(), &suite.csv(), "benchmark CSV")?;
    Ok(0)
}

// ------------------------------------------------------------ run-server

fn cmd_run_server(host: &str, port: u16, pool: usize, seed: Option<u64>) -> Result<i32> {
    let enclave = Arc::new(match seed {
        Some(_) => Enclave::with_rng(stream(seed, 1)),
        None => Enclave::new(),
    });
    let config = ServerConfig {
        scheduler: SchedulerConfig { pool_size: pool, ..SchedulerConfig::default() },
        seed,
    };
    let handle = start_server_on(&format!("{host}:{port}"), enclave, config)?;
    println!("listening on {}", handle.addr());
    println!("measurement {}", hex32(&Enclave::measurement()));
    println!("pool size {pool}; press Ctrl-C to stop");
    loop {
        std::thread::park();
    }
}

// ------------------------------------------------------------ run-client

fn cmd_run_client(
    host: &str,
    port: u16,
    program: &Path,
    keys: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<i32> {
    let text = fs::read_to_string(program)?;
    let program = HomomorphicProgram::parse(&text)?;
    let (params, sk, pk, evk) = load_keys(keys)?;
    let ctx = SheContext::new(params.clone())?;
    let estimator = BudgetEstimator::calibrate(&ctx, &mut stream(seed, 2))?;

    let mut rng = stream(seed, 3);
    let mut id_bytes = [0u8; 16];
    rng.fill_bytes(&mut id_bytes);
    let client_id = ClientId(id_bytes);

    let addr = format!("{host}:{port}");
    let mut link = ServerLink::connect(&addr, client_id, &Enclave::measurement(), &mut rng)?;
    link.provision(&params, &sk, &pk)?;
    println!("connected to {addr} as client {client_id}");

    let (outputs, report) = run_program(
        &program,
        &ctx,
        &pk,
        &evk,
        &estimator,
        &sk,
        Some(Box::new(link)),
        RunOptions::default(),
        stream(seed, 4),
    )?;

    for (name, value) in &outputs {
        println!("{name} = {value}");
    }
    write_or_print(out.as_deref(), &report.csv(), "run report")?;
    Ok(0)
}

// --------------------------------------------------------------- lr-demo

fn cmd_lr_demo(iters: usize, seed: u64, out: Option<PathBuf>) -> Result<i32> {
    let records = 500;
    let dims = 5;
    let dataset = synth_dataset(seed, records, dims);
    let cfg = LrConfig { iterations: iters, ..LrConfig::default() };

    let params = lr_params()?;
    let ctx = SheContext::new(params)?;
    let mut rng = stream(Some(seed), 5);
    let (sk, pk) = generate_keys(&ctx, &mut rng)?;
    let evk = generate_eval_keys(&ctx, &mut rng, &sk)?;
    let estimator = BudgetEstimator::calibrate(&ctx, &mut stream(Some(seed), 6))?;

    let enclave = Arc::new(Enclave::with_rng(stream(Some(seed), 7)));
    let refresh =
        LocalRefresh::provision(enclave, *ClientId::from_u128(1).as_bytes(), &ctx, &sk, &pk,
            &mut rng)?;

    println!("training on {records} records x {dims} binary covariates, {iters} iteration(s)");
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
        stream(Some(seed), 8),
    )?;

    let w_plain = lr::wh_to_weights(&wh_plain);
    let w_enc = lr::wh_to_weights(&wh_enc);
    println!("weight    plaintext   encrypted");
    for (i, (p, e)) in w_plain.iter().zip(&w_enc).enumerate() {
        println!("w[{i}]     {p:+.4}     {e:+.4}");
    }
    println!(
        "log-loss: start {:.4}, plain {:.4}, encrypted {:.4}",
        (2.0f64).ln(),
        lr::log_loss(&dataset, &w_plain),
        lr::log_loss(&dataset, &w_enc),
    );
    println!("bootstraps during encrypted run: {}", report.bootstrap_count);

    let scale = lr::WH_SCALE as f64;
    let deviation = wh_plain
        .iter()
        .zip(&wh_enc)
        .map(|(p, e)| (p - e).abs())
        .max()
        .unwrap_or(0) as f64
        / scale;
    let tolerance = 2.0 / scale;
    println!("max weight deviation {deviation:.6} (tolerance {tolerance:.6})");
    write_or_print(out.as_deref(), &report.csv(), "training report")?;

    if deviation > tolerance {
        eprintln!("self-check FAILED: trainers disagree beyond tolerance");
        return Ok(3);
    }
    println!("self-check passed: encrypted and plaintext trainers agree");
    Ok(0)
}

// ------------------------------------------------------------ sched-eval

fn cmd_sched_eval(
    clients: usize,
    pool: usize,
    trials: usize,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<i32> {
    if clients == 0 || trials == 0 {
        return Err(teefhe::Error::InvalidParameters(
            "--clients and --trials must be positive".into(),
        ));
    }
    let config = SchedulerConfig { pool_size: pool, ..SchedulerConfig::default() };
    let runner = Arc::new(InjectedDelayRunner::new(Duration::from_millis(10)));
    let service = Arc::new(BootstrapService::start(runner, config)?);

    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for c in 0..clients {
            let service = Arc::clone(&service);
            let mut rng = RandomStream::from_u64_seed(seed.wrapping_add(c as u64));
            handles.push(scope.spawn(move || -> Result<()> {
                let id = *ClientId::from_u128(c as u128 + 1).as_bytes();
                let mut payload = vec![0u8; 256];
                for _ in 0..trials {
                    rng.fill_bytes(&mut payload);
                    service.submit(id, payload.clone())?;
                    service.wait_for(&id, Duration::from_secs(60))?;
                }
                Ok(())
            }));
        }
        for handle in handles {
            handle.join().expect("client thread panicked")?;
        }
        Ok(())
    })?;

    let stats = service.waiting_time_stats();
    let mean_ms = stats.mean_wait_ns().unwrap_or(0.0) / 1e6;
    let p95_ms = stats.percentile_wait_ns(95.0).unwrap_or(0) as f64 / 1e6;
    println!(
        "{} refreshes across {clients} client(s), pool {pool}: mean wait {mean_ms:.2} ms, p95 {p95_ms:.2} ms",
        stats.len(),
    );
    write_or_print(out.as_deref(), &stats.csv(), "waiting-time CSV")?;

    Arc::try_unwrap(service)
        .unwrap_or_else(|_| panic!("client threads still hold the service"))
        .shutdown();
    Ok(0)
}
