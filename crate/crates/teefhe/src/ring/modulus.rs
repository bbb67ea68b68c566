//! Word-sized modular arithmetic.
//!
//! All ring arithmetic reduces against a [`Modulus`]: an integer
//! `2 <= q < 2^62`. The two spare bits guarantee that `a + b` for reduced
//! operands never overflows a `u64` and that products fit comfortably in
//! `u128`, so every primitive here is two machine words at worst.
//!
//! The arithmetic helpers are written branch-free on the value path (masks
//! instead of comparisons picking results). That costs nothing measurable
//! and lets the enclave-safe layer reuse them verbatim.

use crate::error::{Error, Result};

/// Upper bound (exclusive) for modulus values: 2^62.
pub const MODULUS_MAX: u64 = 1 << 62;

/// A word-sized modulus with the arithmetic defined on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Modulus {
    value: u64,
}

impl Modulus {
    /// Creates a modulus. Requires `2 <= value < 2^62`.
    pub fn new(value: u64) -> Result<Self> {
        if value < 2 || value >= MODULUS_MAX {
            return Err(Error::InvalidParameters(format!(
                "modulus must satisfy 2 <= q < 2^62, got {value}"
            )));
        }
        Ok(Modulus { value })
    }

    /// The raw modulus value.
    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    /// Number of significant bits of the modulus value.
    #[inline]
    pub fn bits(&self) -> u32 {
        64 - self.value.leading_zeros()
    }

    /// Reduces an arbitrary `u64` into `[0, q)`.
    #[inline]
    pub fn reduce(&self, a: u64) -> u64 {
        a % self.value
    }

    /// Reduces an arbitrary `u128` into `[0, q)`.
    #[inline]
    pub fn reduce_u128(&self, a: u128) -> u64 {
        (a % self.value as u128) as u64
    }

    /// `(a + b) mod q` for already-reduced operands, branch-free.
    #[inline]
    pub fn add_mod(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.value && b < self.value);
        let s = a + b; // < 2^63, cannot overflow
        let d = s.wrapping_sub(self.value);
        // d wrapped (top bit set) iff s < q; add q back in that case.
        let mask = 0u64.wrapping_sub(d >> 63);
        d.wrapping_add(self.value & mask)
    }

    /// `(a - b) mod q` for already-reduced operands, branch-free.
    #[inline]
    pub fn sub_mod(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.value && b < self.value);
        let d = a.wrapping_sub(b);
        let mask = 0u64.wrapping_sub(d >> 63);
        d.wrapping_add(self.value & mask)
    }

    /// `(-a) mod q` for a reduced operand, branch-free.
    #[inline]
    pub fn neg_mod(&self, a: u64) -> u64 {
        debug_assert!(a < self.value);
        // q - a, except that a = 0 must map to 0, not q.
        let nz = 0u64.wrapping_sub(((a | a.wrapping_neg()) >> 63) & 1);
        self.value.wrapping_sub(a) & nz
    }

    /// `(a * b) mod q` via a double-width product.
    #[inline]
    pub fn mul_mod(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.value as u128) as u64
    }

    /// `base^exponent mod q`.
    ///
    /// Delegates to the fixed-iteration conditional-select ladder in
    /// [`crate::ring::ct::exponentiate_uint_mod`], so the work done is
    /// independent of the exponent value.
    #[inline]
    pub fn pow_mod(&self, base: u64, exponent: u64) -> u64 {
        crate::ring::ct::exponentiate_uint_mod(base, exponent, *self)
    }

    /// Multiplicative inverse of `a` modulo `q`, if `gcd(a, q) = 1`.
    pub fn inv_mod(&self, a: u64) -> Option<u64> {
        // Extended Euclid over i128; operands here are always public
        // (twiddle factors, n^-1), so data-dependent flow is fine.
        let (mut r0, mut r1) = (self.value as i128, self.reduce(a) as i128);
        let (mut t0, mut t1) = (0i128, 1i128);
        while r1 != 0 {
            let k = r0 / r1;
            (r0, r1) = (r1, r0 - k * r1);
            (t0, t1) = (t1, t0 - k * t1);
        }
        if r0 != 1 {
            return None;
        }
        Some(t0.rem_euclid(self.value as i128) as u64)
    }

    /// Deterministic Miller–Rabin primality test, exact for all `u64`.
    pub fn is_prime(&self) -> bool {
        let n = self.value;
        if n < 4 {
            return n == 2 || n == 3;
        }
        if n % 2 == 0 {
            return false;
        }
        let mut d = n - 1;
        let mut s = 0u32;
        while d % 2 == 0 {
            d /= 2;
            s += 1;
        }
        // These witnesses decide primality for every n < 3.3 * 10^24.
        'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
            let a = a % n;
            if a == 0 {
                continue;
            }
            let mut x = self.pow_mod(a, d);
            if x == 1 || x == n - 1 {
                continue;
            }
            for _ in 1..s {
                x = self.mul_mod(x, x);
                if x == n - 1 {
                    continue 'witness;
                }
            }
            return false;
        }
        true
    }

    /// Whether the negacyclic NTT of degree `n` exists for this modulus:
    /// `q` prime with `q ≡ 1 (mod 2n)`.
    pub fn supports_ntt(&self, n: usize) -> bool {
        n.is_power_of_two() && self.value % (2 * n as u64) == 1 && self.is_prime()
    }
}

/// Largest prime `p < 2^bits` with `p ≡ 1 (mod m)`.
///
/// Used by the parameter presets; the search is deterministic, so a preset
/// always denotes the same modulus.
pub fn largest_prime_congruent(bits: u32, m: u64) -> Result<Modulus> {
    if bits < 3 || bits > 62 {
        return Err(Error::InvalidParameters(format!(
            "prime bit size {bits} out of range 3..=62"
        )));
    }
    let top = 1u64 << bits;
    let mut k = (top - 2) / m;
    while k > 0 {
        let candidate = k * m + 1;
        if candidate < top / 2 {
            break;
        }
        let p = Modulus::new(candidate)?;
        if p.is_prime() {
            return Ok(p);
        }
        k -= 1;
    }
    Err(Error::InvalidParameters(format!(
        "no {bits}-bit prime ≡ 1 mod {m}"
    )))
}

/// Smallest prime `p >= start` with `p ≡ 1 (mod m)`.
pub fn smallest_prime_congruent(start: u64, m: u64) -> Result<Modulus> {
    let mut k = start.saturating_sub(1).div_ceil(m).max(1);
    loop {
        let candidate = k
            .checked_mul(m)
            .and_then(|v| v.checked_add(1))
            .filter(|&v| v < MODULUS_MAX)
            .ok_or_else(|| {
                Error::InvalidParameters(format!("no prime ≡ 1 mod {m} at or above {start}"))
            })?;
        let p = Modulus::new(candidate)?;
        if p.is_prime() {
            return Ok(p);
        }
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range() {
        assert!(Modulus::new(0).is_err());
        assert!(Modulus::new(1).is_err());
        assert!(Modulus::new(MODULUS_MAX).is_err());
        assert!(Modulus::new(2).is_ok());
        assert!(Modulus::new(MODULUS_MAX - 1).is_ok());
    }

    #[test]
    fn arithmetic_matches_wide_reference() {
        let qs = [2u64, 3, 17, 97, 3329, (1 << 61) + 12345];
        for &qv in &qs {
            let q = Modulus::new(qv).unwrap();
            // Deterministic pseudo-random probe values.
            let mut x: u64 = 0x9e3779b97f4a7c15;
            for _ in 0..500 {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let a = q.reduce(x);
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let b = q.reduce(x);
                assert_eq!(q.add_mod(a, b), ((a as u128 + b as u128) % qv as u128) as u64);
                assert_eq!(
                    q.sub_mod(a, b),
                    ((a as i128 - b as i128).rem_euclid(qv as i128)) as u64
                );
                assert_eq!(q.neg_mod(a), ((qv as i128 - a as i128) % qv as i128) as u64);
                assert_eq!(q.mul_mod(a, b), ((a as u128 * b as u128) % qv as u128) as u64);
            }
        }
    }

    #[test]
    fn inverse_round_trips() {
        let q = Modulus::new(97).unwrap();
        for a in 1..97u64 {
            let inv = q.inv_mod(a).unwrap();
            assert_eq!(q.mul_mod(a, inv), 1);
        }
        // Non-invertible residue under a composite modulus.
        let m = Modulus::new(16).unwrap();
        assert!(m.inv_mod(4).is_none());
        assert_eq!(m.mul_mod(m.inv_mod(3).unwrap(), 3), 1);
    }

    #[test]
    fn primality_known_values() {
        for &p in &[2u64, 3, 5, 17, 97, 3329, 65537, 4611686018326724609] {
            assert!(Modulus::new(p).unwrap().is_prime(), "{p} is prime");
        }
        for &c in &[4u64, 15, 1048577, 3329 * 17, 6700417 * 641] {
            assert!(!Modulus::new(c).unwrap().is_prime(), "{c} is composite");
        }
    }

    #[test]
    fn ntt_support_requires_prime_congruence() {
        assert!(Modulus::new(3329).unwrap().supports_ntt(8)); // 3329 = 208*16 + 1
        assert!(Modulus::new(97).unwrap().supports_ntt(4));
        assert!(!Modulus::new(97).unwrap().supports_ntt(64)); // 97 ≢ 1 mod 128
        assert!(!Modulus::new(91).unwrap().supports_ntt(2)); // composite
    }

    #[test]
    fn prime_searches_are_deterministic_and_correct() {
        let p = largest_prime_congruent(40, 272).unwrap();
        assert!(p.is_prime());
        assert_eq!(p.value() % 272, 1);
        assert!(p.value() < (1 << 40) && p.value() > (1 << 39));
        let p2 = largest_prime_congruent(40, 272).unwrap();
        assert_eq!(p.value(), p2.value());

        let s = smallest_prime_congruent(1 << 20, 2048).unwrap();
        assert!(s.is_prime());
        assert_eq!(s.value() % 2048, 1);
        assert!(s.value() >= (1 << 20));
    }
}
