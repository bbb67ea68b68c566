//! Instrumented branch-free word operations.
//!
//! This is the only layer enclave-side code may use to touch secret data.
//! Every operation does the same work for every input value: selections are
//! computed with masks (both candidates always evaluated), exponentiation
//! always walks all 64 exponent bits, and buffer moves always read both
//! operands. Each operation additionally reports itself to the trace
//! recorder, and the [`SecretSlice`]/[`SecretSliceMut`] wrappers report the
//! index of every element access, which is what the differential-trace tests
//! compare across secrets.
//!
//! The deliberately leaky `*_leaky` twins exist as negative controls for the
//! harness: they must be *detected* by the trace tests, never called from
//! enclave paths.

use super::modulus::Modulus;
use super::trace::{record, TraceOp};

/// Branch-free word select: returns `if_one` when `cond = 1`, `if_zero`
/// when `cond = 0`. Both inputs are always read.
#[inline]
pub fn select_u64(cond: u64, if_one: u64, if_zero: u64) -> u64 {
    debug_assert!(cond <= 1);
    let mask = 0u64.wrapping_sub(cond); // 0 or all-ones
    record(TraceOp::CondMove, None);
    (if_one & mask) | (if_zero & !mask)
}

/// Copies `source[0..size]` into `dest[0..size]` iff `cond = 1`, touching
/// the same words in the same order for both values of `cond`.
pub fn conditional_move(source: &[u64], dest: &mut [u64], size: usize, cond: u64) {
    assert!(cond <= 1, "cond must be 0 or 1");
    assert!(
        source.len() >= size && dest.len() >= size,
        "buffers shorter than size"
    );
    let mask = 0u64.wrapping_sub(cond);
    for i in 0..size {
        record(TraceOp::CondMove, Some(i as u32));
        dest[i] = (source[i] & mask) | (dest[i] & !mask);
    }
}

/// Negative control: a conditional move with a data-dependent branch.
///
/// Identical post-state to [`conditional_move`], but it only touches the
/// buffers when `cond = 1`, so its trace depends on the condition. Used to
/// prove the differential harness actually detects leaks.
pub fn leaky_conditional_move(source: &[u64], dest: &mut [u64], size: usize, cond: u64) {
    assert!(cond <= 1, "cond must be 0 or 1");
    if cond == 1 {
        for i in 0..size {
            record(TraceOp::CondMove, Some(i as u32));
            dest[i] = source[i];
        }
    }
}

/// `base^exponent mod q` with an exponent-independent schedule.
///
/// Square-and-multiply over all 64 exponent bits; the multiply result is
/// folded in with [`conditional_move`] instead of a branch, so the traced
/// event sequence is the same for every exponent.
pub fn exponentiate_uint_mod(base: u64, exponent: u64, modulus: Modulus) -> u64 {
    let mut result = [1u64 % modulus.value()];
    let mut power = modulus.reduce(base);
    for i in 0..64 {
        let bit = (exponent >> i) & 1;
        let folded = [mul_mod_traced(modulus, result[0], power)];
        conditional_move(&folded, &mut result, 1, bit);
        power = mul_mod_traced(modulus, power, power);
    }
    result[0]
}

/// Negative control: square-and-multiply that branches on exponent bits and
/// stops at the top set bit. Correct output, leaky trace.
pub fn exponentiate_uint_mod_leaky(base: u64, exponent: u64, modulus: Modulus) -> u64 {
    let mut result = 1u64 % modulus.value();
    let mut power = modulus.reduce(base);
    let mut e = exponent;
    while e != 0 {
        if e & 1 == 1 {
            result = mul_mod_traced(modulus, result, power);
        }
        power = mul_mod_traced(modulus, power, power);
        e >>= 1;
    }
    result
}

/// Traced modular multiply.
#[inline]
pub(crate) fn mul_mod_traced(q: Modulus, a: u64, b: u64) -> u64 {
    record(TraceOp::MulMod, None);
    q.mul_mod(a, b)
}

/// Traced modular add.
#[inline]
pub(crate) fn add_mod_traced(q: Modulus, a: u64, b: u64) -> u64 {
    record(TraceOp::AddMod, None);
    q.add_mod(a, b)
}

/// Traced modular subtract.
#[inline]
pub(crate) fn sub_mod_traced(q: Modulus, a: u64, b: u64) -> u64 {
    record(TraceOp::SubMod, None);
    q.sub_mod(a, b)
}

/// Traced round-half-up division `(num + den/2) / den` on a double-width
/// numerator, used by decryption scaling. Branch-free: the quotient is
/// computed unconditionally.
#[inline]
pub(crate) fn round_div_traced(num: u128, den: u64) -> u64 {
    record(TraceOp::RoundDiv, None);
    ((num + den as u128 / 2) / den as u128) as u64
}

/// Read-only view of a secret-tagged word buffer; every read is traced with
/// its index.
pub struct SecretSlice<'a> {
    data: &'a [u64],
}

impl<'a> SecretSlice<'a> {
    /// Wraps a secret buffer.
    pub fn new(data: &'a [u64]) -> Self {
        SecretSlice { data }
    }

    /// Length of the underlying buffer.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// True if the buffer is empty.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Traced element read.
    #[inline]
    pub fn get(&self, i: usize) -> u64 {
        record(TraceOp::SecretLoad, Some(i as u32));
        self.data[i]
    }
}

/// Mutable secret-tagged word buffer; reads and writes are traced with
/// their indices.
pub struct SecretSliceMut<'a> {
    data: &'a mut [u64],
}

impl<'a> SecretSliceMut<'a> {
    /// Wraps a secret buffer.
    pub fn new(data: &'a mut [u64]) -> Self {
        SecretSliceMut { data }
    }

    /// Length of the underlying buffer.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// True if the buffer is empty.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Traced element read.
    #[inline]
    pub fn get(&self, i: usize) -> u64 {
        record(TraceOp::SecretLoad, Some(i as u32));
        self.data[i]
    }

    /// Traced element write.
    #[inline]
    pub fn set(&mut self, i: usize, v: u64) {
        record(TraceOp::SecretStore, Some(i as u32));
        self.data[i] = v;
    }
}
