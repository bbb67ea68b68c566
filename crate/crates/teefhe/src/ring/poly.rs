//! Polynomials in `Z_q[x]/(x^n + 1)` with schoolbook reference arithmetic.
//!
//! The schoolbook negacyclic multiply here is the correctness anchor for the
//! whole ring layer: the NTT route in [`super::ntt`] is cross-checked against
//! it, and tensor products in homomorphic multiplication reuse the signed
//! convolution helper so that no intermediate value is reduced mod `q`
//! prematurely.

use super::modulus::Modulus;
use crate::error::{Error, Result};

/// Dense polynomial of fixed length `n` over `Z_q`, reduced mod `x^n + 1`.
///
/// Coefficients are stored little-endian (index `i` holds the coefficient of
/// `x^i`) and always kept in `[0, q)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poly {
    n: usize,
    q: Modulus,
    coeffs: Vec<u64>,
}

impl Poly {
    /// The all-zero polynomial.
    pub fn zero(n: usize, q: Modulus) -> Self {
        Poly {
            n,
            q,
            coeffs: vec![0; n],
        }
    }

    /// Builds a polynomial from raw coefficients, reducing each mod `q`.
    pub fn from_coeffs(coeffs: Vec<u64>, q: Modulus) -> Self {
        let reduced = coeffs.iter().map(|&c| q.reduce(c)).collect();
        Poly {
            n: coeffs.len(),
            q,
            coeffs: reduced,
        }
    }

    /// Builds a polynomial from signed coefficients (centered values are
    /// lifted into `[0, q)`).
    pub fn from_signed(coeffs: &[i64], q: Modulus) -> Self {
        let lifted = coeffs
            .iter()
            .map(|&c| {
                if c >= 0 {
                    q.reduce(c as u64)
                } else {
                    q.neg_mod(q.reduce(c.unsigned_abs()))
                }
            })
            .collect();
        Poly {
            n: coeffs.len(),
            q,
            coeffs: lifted,
        }
    }

    /// Ring dimension `n`.
    pub fn len(&self) -> usize {
        self.n
    }

    /// True when `n = 0` (never the case for well-formed ring elements).
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Coefficient modulus.
    pub fn modulus(&self) -> Modulus {
        self.q
    }

    /// Read access to the coefficient vector.
    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    /// Coefficients lifted to the centered representative range
    /// `(-q/2, q/2]`.
    pub fn centered(&self) -> Vec<i64> {
        self.coeffs
            .iter()
            .map(|&c| centered(c, self.q.value()))
            .collect()
    }

    fn check_compatible(&self, other: &Poly) -> Result<()> {
        if self.n != other.n || self.q.value() != other.q.value() {
            return Err(Error::ParameterMismatch(format!(
                "polynomial domains differ: (n={}, q={}) vs (n={}, q={})",
                self.n,
                self.q.value(),
                other.n,
                other.q.value()
            )));
        }
        Ok(())
    }

    /// Coefficient-wise sum.
    pub fn add(&self, other: &Poly) -> Result<Poly> {
        self.check_compatible(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| self.q.add_mod(a, b))
            .collect();
        Ok(Poly {
            n: self.n,
            q: self.q,
            coeffs,
        })
    }

    /// Coefficient-wise difference.
    pub fn sub(&self, other: &Poly) -> Result<Poly> {
        self.check_compatible(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| self.q.sub_mod(a, b))
            .collect();
        Ok(Poly {
            n: self.n,
            q: self.q,
            coeffs,
        })
    }

    /// Coefficient-wise negation.
    pub fn negate(&self) -> Poly {
        let coeffs = self.coeffs.iter().map(|&a| self.q.neg_mod(a)).collect();
        Poly {
            n: self.n,
            q: self.q,
            coeffs,
        }
    }

    /// Multiplies every coefficient by a scalar.
    pub fn scalar_mul(&self, s: u64) -> Poly {
        let s = self.q.reduce(s);
        let coeffs = self.coeffs.iter().map(|&a| self.q.mul_mod(a, s)).collect();
        Poly {
            n: self.n,
            q: self.q,
            coeffs,
        }
    }

    /// Negacyclic product computed coefficient by coefficient, `O(n^2)`.
    ///
    /// This is the reference route: it is kept alongside the transform-based
    /// route permanently so the two can be cross-checked at runtime and in
    /// tests.
    pub fn mul_schoolbook(&self, other: &Poly) -> Result<Poly> {
        self.check_compatible(other)?;
        let n = self.n;
        let q = self.q;
        let mut out = vec![0u64; n];
        for i in 0..n {
            let a = self.coeffs[i];
            if a == 0 {
                continue;
            }
            for j in 0..n {
                let prod = q.mul_mod(a, other.coeffs[j]);
                let k = i + j;
                if k < n {
                    out[k] = q.add_mod(out[k], prod);
                } else {
                    // x^n = -1 wraps the overflowed degree with a sign flip.
                    out[k - n] = q.sub_mod(out[k - n], prod);
                }
            }
        }
        Ok(Poly { n, q, coeffs: out })
    }
}

/// Lifts `x` in `[0, q)` to its centered representative in `(-q/2, q/2]`.
pub fn centered(x: u64, q: u64) -> i64 {
    debug_assert!(x < q);
    if x > q / 2 {
        -((q - x) as i64)
    } else {
        x as i64
    }
}

/// Negacyclic convolution of signed coefficient vectors with `i128`
/// accumulation and no modular reduction.
///
/// Callers are responsible for bounding inputs so `n * max|a| * max|b|`
/// stays below `i128::MAX`; with `|a|, |b| < q < 2^62` and `n <= 2^16` the
/// margin is ample only when the ciphertext modulus is capped per dimension,
/// which the parameter presets guarantee.
pub fn negacyclic_convolve_i128(a: &[i64], b: &[i64]) -> Vec<i128> {
    assert_eq!(a.len(), b.len(), "operand lengths differ");
    let n = a.len();
    let mut out = vec![0i128; n];
    for i in 0..n {
        let ai = a[i] as i128;
        if ai == 0 {
            continue;
        }
        for j in 0..n {
            let prod = ai * b[j] as i128;
            let k = i + j;
            if k < n {
                out[k] += prod;
            } else {
                out[k - n] -= prod;
            }
        }
    }
    out
}
