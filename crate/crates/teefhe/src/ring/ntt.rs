//! Negacyclic number-theoretic transform over `Z_q[x]/(x^n + 1)`.
//!
//! This is the fast multiplication route. It never replaces the schoolbook
//! route in [`super::poly`]: both are kept built and are cross-checked
//! against each other in the test suite, exhaustively at tiny dimensions and
//! randomized at larger ones.
//!
//! The transform uses a `2n`-th primitive root of unity `psi` so that the
//! wrap-around sign of `x^n = -1` is absorbed into the twiddle factors
//! (forward is decimation-in-time Cooley-Tukey, inverse is Gentleman-Sande
//! with a final `n^{-1}` scaling). All butterfly arithmetic goes through the
//! traced word layer, so transforms executed inside a trace capture show a
//! fixed, input-independent event sequence.
//!
//! Root choice is canonical: among all `n` primitive `2n`-th roots mod `q`
//! (the odd powers of any one of them), the numerically smallest is used, so
//! two parties deriving tables from `(n, q)` always agree.

use super::ct::{add_mod_traced, mul_mod_traced, sub_mod_traced};
use super::modulus::Modulus;
use super::poly::Poly;
use crate::error::{Error, Result};

/// Precomputed twiddle tables for one `(n, q)` pair.
#[derive(Clone, Debug)]
pub struct NttTables {
    n: usize,
    q: Modulus,
    /// `psi^{bitrev(i)}` for the forward pass.
    psi_rev: Vec<u64>,
    /// `psi^{-bitrev(i)}` for the inverse pass.
    inv_psi_rev: Vec<u64>,
    n_inv: u64,
    root: u64,
}

impl NttTables {
    /// Builds tables for `(n, q)`; fails with [`Error::NttUnsupported`] when
    /// `n` is not a power of two or `q` is not a prime `≡ 1 (mod 2n)`.
    pub fn new(n: usize, q: Modulus) -> Result<NttTables> {
        if !q.supports_ntt(n) {
            return Err(Error::NttUnsupported { n, q: q.value() });
        }
        let root = canonical_root(n, q);
        let root_inv = q
            .inv_mod(root)
            .expect("primitive root is invertible mod a prime");

        let log_n = n.trailing_zeros();
        let mut powers = vec![0u64; n];
        let mut inv_powers = vec![0u64; n];
        let mut acc = 1u64;
        let mut inv_acc = 1u64;
        for i in 0..n {
            powers[i] = acc;
            inv_powers[i] = inv_acc;
            acc = q.mul_mod(acc, root);
            inv_acc = q.mul_mod(inv_acc, root_inv);
        }
        let psi_rev = (0..n).map(|i| powers[bit_reverse(i, log_n)]).collect();
        let inv_psi_rev = (0..n).map(|i| inv_powers[bit_reverse(i, log_n)]).collect();
        let n_inv = q
            .inv_mod(n as u64)
            .expect("n < q and q prime, so n is invertible");

        Ok(NttTables {
            n,
            q,
            psi_rev,
            inv_psi_rev,
            n_inv,
            root,
        })
    }

    /// Ring dimension the tables serve.
    pub fn len(&self) -> usize {
        self.n
    }

    /// True when the dimension is zero (never for constructed tables).
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// The canonical primitive `2n`-th root of unity these tables use.
    pub fn root(&self) -> u64 {
        self.root
    }

    /// In-place forward transform (coefficients to evaluations, bit-reversed
    /// evaluation order).
    pub fn forward(&self, a: &mut [u64]) {
        assert_eq!(a.len(), self.n, "operand length mismatch");
        let q = self.q;
        let n = self.n;
        let mut t = n;
        let mut m = 1;
        while m < n {
            t /= 2;
            for i in 0..m {
                let j1 = 2 * i * t;
                let s = self.psi_rev[m + i];
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = mul_mod_traced(q, a[j + t], s);
                    a[j] = add_mod_traced(q, u, v);
                    a[j + t] = sub_mod_traced(q, u, v);
                }
            }
            m *= 2;
        }
    }

    /// In-place inverse transform, including the `n^{-1}` scaling.
    pub fn inverse(&self, a: &mut [u64]) {
        assert_eq!(a.len(), self.n, "operand length mismatch");
        let q = self.q;
        let n = self.n;
        let mut t = 1;
        let mut m = n;
        while m > 1 {
            let h = m / 2;
            let mut j1 = 0;
            for i in 0..h {
                let s = self.inv_psi_rev[h + i];
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = a[j + t];
                    a[j] = add_mod_traced(q, u, v);
                    let d = sub_mod_traced(q, u, v);
                    a[j + t] = mul_mod_traced(q, d, s);
                }
                j1 += 2 * t;
            }
            t *= 2;
            m = h;
        }
        for x in a.iter_mut() {
            *x = mul_mod_traced(q, *x, self.n_inv);
        }
    }

    /// Pointwise product of two transformed vectors.
    pub fn pointwise(&self, a: &[u64], b: &[u64], out: &mut [u64]) {
        assert!(a.len() == self.n && b.len() == self.n && out.len() == self.n);
        for i in 0..self.n {
            out[i] = mul_mod_traced(self.q, a[i], b[i]);
        }
    }

    /// Full negacyclic product via transform, pointwise multiply, inverse
    /// transform.
    pub fn mul(&self, a: &Poly, b: &Poly) -> Result<Poly> {
        if a.len() != self.n
            || b.len() != self.n
            || a.modulus().value() != self.q.value()
            || b.modulus().value() != self.q.value()
        {
            return Err(Error::ParameterMismatch(format!(
                "transform tables are for (n={}, q={}), operands are (n={}, q={}) and (n={}, q={})",
                self.n,
                self.q.value(),
                a.len(),
                a.modulus().value(),
                b.len(),
                b.modulus().value()
            )));
        }
        let mut fa = a.coeffs().to_vec();
        let mut fb = b.coeffs().to_vec();
        self.forward(&mut fa);
        self.forward(&mut fb);
        let mut fc = vec![0u64; self.n];
        self.pointwise(&fa, &fb, &mut fc);
        self.inverse(&mut fc);
        Ok(Poly::from_coeffs(fc, self.q))
    }
}

/// Reverses the low `bits` bits of `i`.
fn bit_reverse(i: usize, bits: u32) -> usize {
    (i as u64).reverse_bits().wrapping_shr(64 - bits) as usize
}

/// Finds the numerically smallest primitive `2n`-th root of unity mod `q`.
///
/// First locates any element of order exactly `2n` by raising small bases to
/// `(q-1)/2n` and checking that the `n`-th power of the result is `-1`; the
/// odd powers of that element enumerate every primitive `2n`-th root, and
/// the minimum over them is taken as the canonical choice.
fn canonical_root(n: usize, q: Modulus) -> u64 {
    let two_n = 2 * n as u64;
    let exp = (q.value() - 1) / two_n;
    let minus_one = q.value() - 1;
    let mut some_root = 0u64;
    for g in 2..q.value() {
        let c = q.pow_mod(g, exp);
        if q.pow_mod(c, n as u64) == minus_one {
            some_root = c;
            break;
        }
    }
    assert!(some_root != 0, "no primitive root found for valid parameters");

    // Odd powers of a primitive 2n-th root are exactly the primitive roots
    // (2n is a power of two, so gcd(m, 2n) = 1 iff m is odd).
    let sq = q.mul_mod(some_root, some_root);
    let mut cur = some_root;
    let mut best = some_root;
    for _ in 1..n {
        cur = q.mul_mod(cur, sq);
        if cur < best {
            best = cur;
        }
    }
    best
}
