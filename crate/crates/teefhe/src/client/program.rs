//! Straight-line homomorphic programs over named ciphertext registers.
//!
//! Text format, one instruction per line, `#` starts a comment:
//!
//! ```text
//! INPUT x 5        # encrypt the constant 5 into register x
//! ADD   s x x      # s = x + x
//! MUL   p s x      # p = s * x  (result needs RELIN before reuse in MUL)
//! RELIN p
//! ADDP  q p -3     # q = p + (-3)
//! MULP  r q 7      # r = q * 7
//! NEG   m r        # m = -r
//! OUTPUT m
//! ```
//!
//! Operand separators may be spaces or commas. Registers are defined
//! before use and never redefined, so programs are straight-line by
//! construction. The plaintext shadow executor runs the same instructions
//! over scalars modulo `t` and is the correctness oracle for the
//! homomorphic path.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::ring::RandomStream;

/// One instruction over named registers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Instr {
    /// Encrypt a constant into a fresh register.
    Input { dst: String, value: i64 },
    /// `dst = a + b`.
    Add { dst: String, a: String, b: String },
    /// `dst = a * b`; the result must be relinearized before it feeds
    /// another multiplication.
    Mul { dst: String, a: String, b: String },
    /// Relinearize `dst` in place (no-op on already-compact registers).
    Relin { dst: String },
    /// `dst = a + value`.
    AddPlain { dst: String, a: String, value: i64 },
    /// `dst = a * value`; `value` must be non-zero.
    MulPlain { dst: String, a: String, value: i64 },
    /// `dst = -a`.
    Neg { dst: String, a: String },
    /// Decrypt `src` into the program's output list.
    Output { src: String },
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instr::Input { dst, value } => write!(f, "INPUT {dst} {value}"),
            Instr::Add { dst, a, b } => write!(f, "ADD {dst} {a} {b}"),
            Instr::Mul { dst, a, b } => write!(f, "MUL {dst} {a} {b}"),
            Instr::Relin { dst } => write!(f, "RELIN {dst}"),
            Instr::AddPlain { dst, a, value } => write!(f, "ADDP {dst} {a} {value}"),
            Instr::MulPlain { dst, a, value } => write!(f, "MULP {dst} {a} {value}"),
            Instr::Neg { dst, a } => write!(f, "NEG {dst} {a}"),
            Instr::Output { src } => write!(f, "OUTPUT {src}"),
        }
    }
}

impl Instr {
    /// The register this instruction defines, if any.
    fn defines(&self) -> Option<&str> {
        match self {
            Instr::Input { dst, .. }
            | Instr::Add { dst, .. }
            | Instr::Mul { dst, .. }
            | Instr::AddPlain { dst, .. }
            | Instr::MulPlain { dst, .. }
            | Instr::Neg { dst, .. } => Some(dst),
            Instr::Relin { .. } | Instr::Output { .. } => None,
        }
    }

    /// The registers this instruction reads.
    fn reads(&self) -> Vec<&str> {
        match self {
            Instr::Input { .. } => vec![],
            Instr::Add { a, b, .. } | Instr::Mul { a, b, .. } => vec![a, b],
            Instr::Relin { dst } => vec![dst],
            Instr::AddPlain { a, .. } | Instr::MulPlain { a, .. } | Instr::Neg { a, .. } => {
                vec![a]
            }
            Instr::Output { src } => vec![src],
        }
    }
}

/// A validated straight-line program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HomomorphicProgram {
    instrs: Vec<Instr>,
}

impl HomomorphicProgram {
    /// Validates and wraps an instruction list.
    ///
    /// Rules: every register is defined before it is read, no register is
    /// defined twice, multiply-by-zero constants are rejected, and the
    /// program contains at least one OUTPUT.
    pub fn new(instrs: Vec<Instr>) -> Result<Self> {
        // for programmatically built programs, "line" is the 1-based
        // instruction position
        let fail = |idx: usize, reason: String| -> Result<Self> {
            Err(Error::Program { line: idx + 1, reason })
        };
        let mut defined: HashMap<&str, ()> = HashMap::new();
        let mut outputs = 0usize;
        for (idx, instr) in instrs.iter().enumerate() {
            for reg in instr.reads() {
                if !defined.contains_key(reg) {
                    return fail(idx, format!("{instr} reads undefined register {reg}"));
                }
            }
            if let Instr::MulPlain { value: 0, .. } = instr {
                return fail(idx, "multiplies by zero; fold the constant instead".into());
            }
            if let Some(dst) = instr.defines() {
                if defined.insert(dst, ()).is_some() {
                    return fail(idx, format!("{instr} redefines register {dst}"));
                }
            }
            if matches!(instr, Instr::Output { .. }) {
                outputs += 1;
            }
        }
        if outputs == 0 {
            return Err(Error::Program {
                line: instrs.len(),
                reason: "program has no OUTPUT instruction".into(),
            });
        }
        Ok(HomomorphicProgram { instrs })
    }

    /// Parses the one-instruction-per-line text form.
    pub fn parse(text: &str) -> Result<Self> {
        let mut instrs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .collect();
            let fail = |msg: &str| {
                Err(Error::Program { line: lineno + 1, reason: format!("{msg}: {raw}") })
            };
            let int = |t: &str| -> Result<i64> {
                t.parse::<i64>().map_err(|_| Error::Program {
                    line: lineno + 1,
                    reason: format!("bad integer {t}"),
                })
            };
            let op = tokens[0].to_ascii_uppercase();
            let instr = match (op.as_str(), tokens.len()) {
                ("INPUT", 3) => Instr::Input { dst: tokens[1].into(), value: int(tokens[2])? },
                ("ADD", 4) => {
                    Instr::Add { dst: tokens[1].into(), a: tokens[2].into(), b: tokens[3].into() }
                }
                ("MUL", 4) => {
                    Instr::Mul { dst: tokens[1].into(), a: tokens[2].into(), b: tokens[3].into() }
                }
                ("RELIN", 2) => Instr::Relin { dst: tokens[1].into() },
                ("ADDP", 4) => Instr::AddPlain {
                    dst: tokens[1].into(),
                    a: tokens[2].into(),
                    value: int(tokens[3])?,
                },
                ("MULP", 4) => Instr::MulPlain {
                    dst: tokens[1].into(),
                    a: tokens[2].into(),
                    value: int(tokens[3])?,
                },
                ("NEG", 3) => Instr::Neg { dst: tokens[1].into(), a: tokens[2].into() },
                ("OUTPUT", 2) => Instr::Output { src: tokens[1].into() },
                ("INPUT" | "ADD" | "MUL" | "RELIN" | "ADDP" | "MULP" | "NEG" | "OUTPUT", _) => {
                    return fail("wrong operand count")
                }
                _ => return fail("unknown opcode"),
            };
            instrs.push(instr);
        }
        Self::new(instrs)
    }

    /// The instruction list.
    pub fn instrs(&self) -> &[Instr] {
        &self.instrs
    }

    /// Number of instructions.
    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    /// True when the program is empty (never, for validated programs).
    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    /// Number of ciphertext-by-ciphertext multiplications.
    pub fn mul_count(&self) -> usize {
        self.instrs
            .iter()
            .filter(|i| matches!(i, Instr::Mul { .. }))
            .count()
    }

    /// Runs the program over plaintext scalars modulo `t`.
    ///
    /// Returns `(register, value)` pairs in OUTPUT order. This is the
    /// reference the homomorphic execution must reproduce.
    pub fn shadow_execute(&self, t: u64) -> Result<Vec<(String, u64)>> {
        let enc = |v: i64| -> u64 { (v as i128).rem_euclid(t as i128) as u64 };
        let mut regs: HashMap<&str, u64> = HashMap::new();
        let mut outputs = Vec::new();
        for instr in &self.instrs {
            match instr {
                Instr::Input { dst, value } => {
                    regs.insert(dst, enc(*value));
                }
                Instr::Add { dst, a, b } => {
                    let v = (regs[a.as_str()] + regs[b.as_str()]) % t;
                    regs.insert(dst, v);
                }
                Instr::Mul { dst, a, b } => {
                    let v = (regs[a.as_str()] as u128 * regs[b.as_str()] as u128 % t as u128)
                        as u64;
                    regs.insert(dst, v);
                }
                Instr::Relin { .. } => {}
                Instr::AddPlain { dst, a, value } => {
                    let v = (regs[a.as_str()] + enc(*value)) % t;
                    regs.insert(dst, v);
                }
                Instr::MulPlain { dst, a, value } => {
                    let v =
                        (regs[a.as_str()] as u128 * enc(*value) as u128 % t as u128) as u64;
                    regs.insert(dst, v);
                }
                Instr::Neg { dst, a } => {
                    let v = (t - regs[a.as_str()]) % t;
                    regs.insert(dst, v);
                }
                Instr::Output { src } => {
                    outputs.push((src.clone(), regs[src.as_str()]));
                }
            }
        }
        Ok(outputs)
    }

    /// Renders the canonical text form.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for instr in &self.instrs {
            out.push_str(&instr.to_string());
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for HomomorphicProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Generates a random valid straight-line program.
///
/// The program has at most `max_len` instructions, multiplicative depth at
/// most `max_depth`, input values drawn modulo `t`, and small non-zero
/// plain constants. Every multiplication is followed by an immediate
/// relinearization so all registers stay compact.
pub fn random_program(
    rng: &mut RandomStream,
    max_len: usize,
    max_depth: u32,
    t: u64,
) -> HomomorphicProgram {
    let mut instrs: Vec<Instr> = Vec::new();
    // (name, multiplicative depth) of defined registers
    let mut regs: Vec<(String, u32)> = Vec::new();
    let mut next_id = 0usize;
    let name = |next_id: &mut usize| {
        let n = format!("r{next_id}");
        *next_id += 1;
        n
    };

    let inputs = 2 + (rng.next_word() % 3) as usize;
    for _ in 0..inputs {
        let dst = name(&mut next_id);
        let value = (rng.next_word() % t) as i64;
        instrs.push(Instr::Input { dst: dst.clone(), value });
        regs.push((dst, 0));
    }

    while instrs.len() + 2 < max_len {
        let pick = |rng: &mut RandomStream, regs: &[(String, u32)]| {
            let i = (rng.next_word() as usize) % regs.len();
            regs[i].clone()
        };
        let small = |rng: &mut RandomStream| -> i64 {
            let magnitude = 1 + (rng.next_word() % 20) as i64;
            if rng.next_word() % 2 == 0 {
                magnitude
            } else {
                -magnitude
            }
        };
        let dst = name(&mut next_id);
        match rng.next_word() % 5 {
            0 => {
                let (a, da) = pick(rng, &regs);
                let (b, db) = pick(rng, &regs);
                instrs.push(Instr::Add { dst: dst.clone(), a, b });
                regs.push((dst, da.max(db)));
            }
            1 => {
                let (a, da) = pick(rng, &regs);
                let (b, db) = pick(rng, &regs);
                if da.max(db) + 1 > max_depth {
                    continue;
                }
                instrs.push(Instr::Mul { dst: dst.clone(), a, b });
                instrs.push(Instr::Relin { dst: dst.clone() });
                regs.push((dst, da.max(db) + 1));
            }
            2 => {
                let (a, da) = pick(rng, &regs);
                instrs.push(Instr::AddPlain { dst: dst.clone(), a, value: small(rng) });
                regs.push((dst, da));
            }
            3 => {
                let (a, da) = pick(rng, &regs);
                instrs.push(Instr::MulPlain { dst: dst.clone(), a, value: small(rng) });
                regs.push((dst, da));
            }
            _ => {
                let (a, da) = pick(rng, &regs);
                instrs.push(Instr::Neg { dst: dst.clone(), a });
                regs.push((dst, da));
            }
        }
    }

    let outputs = 1 + (rng.next_word() % 3) as usize;
    let mut chosen: Vec<String> = Vec::new();
    for _ in 0..outputs {
        let (r, _) = regs[(rng.next_word() as usize) % regs.len()].clone();
        if !chosen.contains(&r) {
            chosen.push(r);
        }
    }
    for src in chosen {
        instrs.push(Instr::Output { src });
    }

    HomomorphicProgram::new(instrs).expect("generated program is valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
        # doubling then cubing-ish
        INPUT x 5
        ADD   s x x      # 10
        MUL   p, s, x    # 50, comma separators are fine
        RELIN p
        ADDP  q p -3     # 47
        MULP  r q 7      # 329
        NEG   m r        # -329
        OUTPUT m
    ";

    #[test]
    fn parses_and_shadows_the_sample() {
        let prog = HomomorphicProgram::parse(SAMPLE).unwrap();
        assert_eq!(prog.len(), 8);
        assert_eq!(prog.mul_count(), 1);
        let out = prog.shadow_execute(1 << 10).unwrap();
        assert_eq!(out, vec![("m".to_string(), 1024 - 329)]);
    }

    #[test]
    fn render_round_trips() {
        let prog = HomomorphicProgram::parse(SAMPLE).unwrap();
        let again = HomomorphicProgram::parse(&prog.render()).unwrap();
        assert_eq!(prog, again);
    }

    #[test]
    fn rejects_undefined_and_redefined_registers() {
        assert!(HomomorphicProgram::parse("ADD a b c\nOUTPUT a").is_err());
        assert!(
            HomomorphicProgram::parse("INPUT a 1\nINPUT a 2\nOUTPUT a").is_err()
        );
        assert!(HomomorphicProgram::parse("INPUT a 1").is_err(), "no OUTPUT");
        assert!(HomomorphicProgram::parse("INPUT a 1\nMULP b a 0\nOUTPUT b").is_err());
        assert!(HomomorphicProgram::parse("FROB a 1\nOUTPUT a").is_err());
        assert!(HomomorphicProgram::parse("INPUT a\nOUTPUT a").is_err());
    }

    #[test]
    fn shadow_handles_negatives_mod_t() {
        let prog = HomomorphicProgram::parse("INPUT a -1\nMULP b a -3\nOUTPUT b").unwrap();
        // (-1) * (-3) = 3
        assert_eq!(prog.shadow_execute(256).unwrap(), vec![("b".into(), 3)]);
    }

    #[test]
    fn random_programs_validate_and_shadow() {
        let mut rng = RandomStream::from_u64_seed(99);
        for _ in 0..50 {
            let prog = random_program(&mut rng, 30, 8, 1 << 10);
            assert!(prog.len() <= 30 + 3);
            let out = prog.shadow_execute(1 << 10).unwrap();
            assert!(!out.is_empty());
            for (_, v) in out {
                assert!(v < (1 << 10));
            }
            // every MUL is immediately relinearized
            let instrs = prog.instrs();
            for (i, instr) in instrs.iter().enumerate() {
                if let Instr::Mul { dst, .. } = instr {
                    assert_eq!(instrs[i + 1], Instr::Relin { dst: dst.clone() });
                }
            }
        }
    }
}
