//! One-call execution of homomorphic programs.
//!
//! [`run_program`] walks a [`HomomorphicProgram`] over an
//! [`EvalSession`], passing each result register a lookahead hint — the
//! estimated cost of the next instruction that will consume it — so the
//! admission policy sees refresh pressure before it becomes urgent. The
//! decrypted outputs are returned with a [`RunReport`] of work done.

use std::time::Instant;

use crate::error::Result;
use crate::ring::RandomStream;
use crate::she::{BudgetEstimator, EvalKeys, EvalOp, PublicKey, SecretKey, SheContext};

use super::program::{HomomorphicProgram, Instr};
use super::session::{EvalSession, RefreshChannel, Reg};

/// Execution options.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Refresh every multiplication result unconditionally instead of
    /// letting the admission policy choose the moments. Output plaintexts
    /// must not depend on this switch.
    pub force_refresh_after_multiply: bool,
}

/// What a program run did.
#[derive(Clone, Copy, Debug)]
pub struct RunReport {
    /// Instructions executed.
    pub instr_count: u64,
    /// Ciphertext-by-ciphertext multiplications.
    pub mul_count: u64,
    /// Completed refreshes.
    pub bootstrap_count: u64,
    /// Wall-clock time for the whole run.
    pub wall_ns: u64,
}

impl RunReport {
    /// The report as a two-line CSV document.
    pub fn csv(&self) -> String {
        format!(
            "instr_count,mul_count,bootstrap_count,wall_ns\n{},{},{},{}\n",
            self.instr_count, self.mul_count, self.bootstrap_count, self.wall_ns
        )
    }
}

/// The estimator cost of one instruction, for lookahead hints.
fn instr_cost(estimator: &BudgetEstimator, instr: &Instr) -> u32 {
    match instr {
        Instr::Input { .. } | Instr::Output { .. } => 0,
        Instr::Add { .. } => estimator.cost(EvalOp::Add),
        Instr::Mul { .. } => estimator.cost(EvalOp::Multiply),
        Instr::Relin { .. } => estimator.cost(EvalOp::Relinearize),
        Instr::AddPlain { .. } => estimator.cost(EvalOp::AddPlain),
        Instr::MulPlain { value, .. } => estimator.cost(EvalOp::MultiplyPlain {
            l1_norm: value.unsigned_abs().max(1),
        }),
        Instr::Neg { .. } => estimator.cost(EvalOp::Negate),
    }
}

/// Cost of the next instruction after `from` that reads `reg`, or zero.
fn lookahead(
    estimator: &BudgetEstimator,
    instrs: &[Instr],
    from: usize,
    reg: &str,
) -> u32 {
    for instr in &instrs[from..] {
        let reads = match instr {
            Instr::Add { a, b, .. } | Instr::Mul { a, b, .. } => a == reg || b == reg,
            Instr::Relin { dst } => dst == reg,
            Instr::AddPlain { a, .. } | Instr::MulPlain { a, .. } | Instr::Neg { a, .. } => {
                a == reg
            }
            Instr::Output { src } => src == reg,
            Instr::Input { .. } => false,
        };
        if reads {
            return instr_cost(estimator, instr);
        }
    }
    0
}

/// Executes a program and decrypts its outputs.
///
/// Outputs are `(register, value)` pairs modulo `t`, in OUTPUT order —
/// exactly the shape [`HomomorphicProgram::shadow_execute`] produces.
/// Without a channel the run aborts with a budget error rather than ever
/// producing an unsound value.
#[allow(clippy::too_many_arguments)]
pub fn run_program<'c>(
    program: &HomomorphicProgram,
    ctx: &'c SheContext,
    pk: &'c PublicKey,
    evk: &'c EvalKeys,
    estimator: &'c BudgetEstimator,
    sk: &SecretKey,
    channel: Option<Box<dyn RefreshChannel + 'c>>,
    options: RunOptions,
    rng: RandomStream,
) -> Result<(Vec<(String, u64)>, RunReport)> {
    let start = Instant::now();
    let t = ctx.params().t().value();
    let mut session = EvalSession::new(ctx, pk, evk, estimator, channel, rng);
    let mut regs: std::collections::HashMap<String, Reg> = std::collections::HashMap::new();
    let mut outputs = Vec::new();

    let instrs = program.instrs();
    for (i, instr) in instrs.iter().enumerate() {
        let hint = |reg: &str| lookahead(estimator, instrs, i + 1, reg);
        match instr {
            Instr::Input { dst, value } => {
                let r = session.input(*value, hint(dst))?;
                regs.insert(dst.clone(), r);
            }
            Instr::Add { dst, a, b } => {
                let r = session.add(regs[a], regs[b], hint(dst))?;
                regs.insert(dst.clone(), r);
            }
            Instr::Mul { dst, a, b } => {
                let r = session.mul(regs[a], regs[b], hint(dst))?;
                if options.force_refresh_after_multiply {
                    session.force_refresh(r)?;
                }
                regs.insert(dst.clone(), r);
            }
            Instr::Relin { dst } => {
                session.relin(regs[dst], hint(dst))?;
            }
            Instr::AddPlain { dst, a, value } => {
                let r = session.add_plain(regs[a], *value, hint(dst))?;
                regs.insert(dst.clone(), r);
            }
            Instr::MulPlain { dst, a, value } => {
                let r = session.mul_plain(regs[a], *value, hint(dst))?;
                regs.insert(dst.clone(), r);
            }
            Instr::Neg { dst, a } => {
                let r = session.neg(regs[a], hint(dst))?;
                regs.insert(dst.clone(), r);
            }
            Instr::Output { src } => {
                let centered = session.output(regs[src], sk)?;
                let value = (centered as i128).rem_euclid(t as i128) as u64;
                outputs.push((src.clone(), value));
            }
        }
    }

    debug_assert_eq!(session.bootstrap_count(), session.estimator_resets());
    let report = RunReport {
        instr_count: session.instr_count(),
        mul_count: session.mul_count(),
        bootstrap_count: session.bootstrap_count(),
        wall_ns: start.elapsed().as_nanos() as u64,
    };
    Ok((outputs, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::program::random_program;
    use crate::client::session::LocalRefresh;
    use crate::enclave::Enclave;
    use crate::error::Error;
    use crate::she::{generate_eval_keys, generate_keys, EncryptionParams};
    use std::sync::Arc;

    struct Env {
        ctx: SheContext,
        sk: SecretKey,
        pk: PublicKey,
        evk: EvalKeys,
        estimator: BudgetEstimator,
        enclave: Arc<Enclave>,
    }

    fn env(n: usize, seed: u64) -> Env {
        let params = EncryptionParams::preset(n).unwrap();
        let ctx = SheContext::new(params).unwrap();
        let mut rng = RandomStream::from_u64_seed(seed);
        let (sk, pk) = generate_keys(&ctx, &mut rng).unwrap();
        let evk = generate_eval_keys(&ctx, &mut rng, &sk).unwrap();
        let estimator = BudgetEstimator::calibrate(&ctx, &mut rng).unwrap();
        Env { ctx, sk, pk, evk, estimator, enclave: Arc::new(Enclave::new()) }
    }

    fn channel(e: &Env, id: u8, seed: u64) -> Box<dyn RefreshChannel> {
        let mut rng = RandomStream::from_u64_seed(seed);
        Box::new(
            LocalRefresh::provision(
                Arc::clone(&e.enclave),
                [id; 16],
                &e.ctx,
                &e.sk,
                &e.pk,
                &mut rng,
            )
            .unwrap(),
        )
    }

    fn deep_mul_chain(depth: usize) -> HomomorphicProgram {
        let mut text = String::from("INPUT x 3\n");
        let mut prev = "x".to_string();
        for i in 0..depth {
            text.push_str(&format!("MUL m{i} {prev} x\nRELIN m{i}\n"));
            prev = format!("m{i}");
        }
        text.push_str(&format!("OUTPUT {prev}\n"));
        HomomorphicProgram::parse(&text).unwrap()
    }

    #[test]
    fn depth_one_runs_without_a_server() {
        let e = env(1024, 11);
        let prog = HomomorphicProgram::parse(
            "INPUT a 7\nINPUT b 9\nMUL p a b\nRELIN p\nADDP q p 1\nOUTPUT q",
        )
        .unwrap();
        let (outputs, report) = run_program(
            &prog,
            &e.ctx,
            &e.pk,
            &e.evk,
            &e.estimator,
            &e.sk,
            None,
            RunOptions::default(),
            RandomStream::from_u64_seed(1),
        )
        .unwrap();
        assert_eq!(outputs, prog.shadow_execute(e.ctx.params().t().value()).unwrap());
        assert_eq!(outputs[0].1, 64);
        assert_eq!(report.bootstrap_count, 0);
        assert_eq!(report.mul_count, 1);
        assert!(report.wall_ns > 0);
    }

    #[test]
    fn depth_twenty_needs_and_gets_refreshes() {
        let e = env(2048, 12);
        let prog = deep_mul_chain(20);
        let (outputs, report) = run_program(
            &prog,
            &e.ctx,
            &e.pk,
            &e.evk,
            &e.estimator,
            &e.sk,
            Some(channel(&e, 31, 313)),
            RunOptions::default(),
            RandomStream::from_u64_seed(2),
        )
        .unwrap();
        assert_eq!(outputs, prog.shadow_execute(e.ctx.params().t().value()).unwrap());
        assert!(report.bootstrap_count >= 1, "deep chain must bootstrap");
        assert_eq!(report.mul_count, 20);
    }

    #[test]
    fn depth_twenty_without_a_server_aborts() {
        let e = env(2048, 13);
        let prog = deep_mul_chain(20);
        let err = run_program(
            &prog,
            &e.ctx,
            &e.pk,
            &e.evk,
            &e.estimator,
            &e.sk,
            None,
            RunOptions::default(),
            RandomStream::from_u64_seed(3),
        )
        .unwrap_err();
        assert!(matches!(err, Error::BudgetExhausted { .. }), "got {err}");
    }

    #[test]
    fn random_programs_match_their_shadows() {
        let e = env(1024, 14);
        let t = e.ctx.params().t().value();
        for trial in 0..10u64 {
            let mut prng = RandomStream::from_u64_seed(500 + trial);
            let prog = random_program(&mut prng, 27, 8, t);
            let (outputs, _) = run_program(
                &prog,
                &e.ctx,
                &e.pk,
                &e.evk,
                &e.estimator,
                &e.sk,
                Some(channel(&e, 40 + trial as u8, 600 + trial)),
                RunOptions::default(),
                RandomStream::from_u64_seed(700 + trial),
            )
            .unwrap();
            assert_eq!(
                outputs,
                prog.shadow_execute(t).unwrap(),
                "program:\n{prog}"
            );
        }
    }

    #[test]
    fn bootstrap_positions_do_not_change_outputs() {
        let e = env(1024, 15);
        let prog = HomomorphicProgram::parse(
            "INPUT a 5\nINPUT b 11\nMUL p a b\nRELIN p\nMUL q p p\nRELIN q\n\
             ADDP r q -9\nMUL s r p\nRELIN s\nNEG u s\nOUTPUT u\nOUTPUT q",
        )
        .unwrap();
        let run = |force: bool, id: u8| {
            run_program(
                &prog,
                &e.ctx,
                &e.pk,
                &e.evk,
                &e.estimator,
                &e.sk,
                Some(channel(&e, id, id as u64)),
                RunOptions { force_refresh_after_multiply: force },
                RandomStream::from_u64_seed(4),
            )
            .unwrap()
        };
        let (policy_outputs, policy_report) = run(false, 50);
        let (forced_outputs, forced_report) = run(true, 51);
        assert_eq!(policy_outputs, forced_outputs);
        assert_eq!(policy_outputs, prog.shadow_execute(e.ctx.params().t().value()).unwrap());
        assert!(forced_report.bootstrap_count >= 3, "one per multiply");
        // the two modes genuinely differ in refresh placement
        assert_ne!(policy_report.bootstrap_count, forced_report.bootstrap_count);
    }
}
