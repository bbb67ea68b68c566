//! Randomness for key generation, encryption, and noise.
//!
//! Everything flows through [`RandomStream`], which wraps a ChaCha20 stream
//! cipher either seeded from OS entropy (production) or from an explicit
//! seed (reproducible runs and tests). Every 64-bit word drawn is reported
//! to the trace recorder, so randomized enclave paths still produce
//! comparable traces when driven by identical streams.
//!
//! Three distributions are provided:
//! - uniform residues mod `q`, by rejection sampling (no modulo bias);
//! - uniform ternary coefficients in `{-1, 0, 1}` for secret keys;
//! - a clipped approximate Gaussian for noise: the sum of twelve uniform
//!   variates (mean 0, unit variance) scaled by `delta` and rounded, then
//!   clamped to `[-clip, clip]`. `delta = 0` degenerates to the all-zero
//!   distribution.

use super::modulus::Modulus;
use super::poly::Poly;
use super::trace::{record, TraceOp};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Stream of random words backing all sampling in the library.
pub struct RandomStream {
    rng: ChaCha20Rng,
}

impl RandomStream {
    /// Stream seeded from operating-system entropy.
    pub fn from_entropy() -> Self {
        RandomStream {
            rng: ChaCha20Rng::from_entropy(),
        }
    }

    /// Deterministic stream from a full 32-byte seed.
    pub fn from_seed(seed: [u8; 32]) -> Self {
        RandomStream {
            rng: ChaCha20Rng::from_seed(seed),
        }
    }

    /// Deterministic stream from a word seed (convenience for CLI `--seed`).
    pub fn from_u64_seed(seed: u64) -> Self {
        RandomStream {
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    /// Draws one raw 64-bit word.
    #[inline]
    pub fn next_word(&mut self) -> u64 {
        record(TraceOp::RngWord, None);
        self.rng.next_u64()
    }

    /// Fills a byte buffer from the word stream.
    pub fn fill_bytes(&mut self, buf: &mut [u8]) {
        let mut chunks = buf.chunks_exact_mut(8);
        for chunk in &mut chunks {
            chunk.copy_from_slice(&self.next_word().to_le_bytes());
        }
        let rem = chunks.into_remainder();
        if !rem.is_empty() {
            let w = self.next_word().to_le_bytes();
            rem.copy_from_slice(&w[..rem.len()]);
        }
    }

    /// Uniform value in `[0, bound)` by rejection sampling: words falling in
    /// the final partial copy of the range are redrawn, so every residue is
    /// exactly equally likely.
    pub fn uniform_below(&mut self, bound: u64) -> u64 {
        assert!(bound >= 1, "bound must be positive");
        // Largest multiple of `bound` representable is 2^64 - r.
        let r = ((u64::MAX % bound) + 1) % bound;
        let max_accept = u64::MAX - r;
        loop {
            let w = self.next_word();
            if w <= max_accept {
                return w % bound;
            }
        }
    }

    /// Uniform residue mod `q`.
    pub fn uniform_mod(&mut self, q: Modulus) -> u64 {
        self.uniform_below(q.value())
    }

    /// Polynomial with independent uniform coefficients mod `q`.
    pub fn uniform_poly(&mut self, n: usize, q: Modulus) -> Poly {
        let coeffs = (0..n).map(|_| self.uniform_mod(q)).collect();
        Poly::from_coeffs(coeffs, q)
    }

    /// Polynomial with independent uniform ternary coefficients, lifted so
    /// `-1` becomes `q - 1`.
    pub fn ternary_poly(&mut self, n: usize, q: Modulus) -> Poly {
        let coeffs = (0..n)
            .map(|_| match self.uniform_below(3) {
                0 => 0,
                1 => 1,
                _ => q.value() - 1,
            })
            .collect();
        Poly::from_coeffs(coeffs, q)
    }

    /// One noise draw: twelve uniforms summed (mean 0, unit variance),
    /// scaled by `delta`, rounded, clamped to `[-clip, clip]`.
    pub fn error_value(&mut self, delta: f64, clip: u64) -> i64 {
        if delta == 0.0 {
            return 0;
        }
        let mut s = -6.0f64;
        for _ in 0..12 {
            // 53 uniform mantissa bits per word.
            s += (self.next_word() >> 11) as f64 * (1.0 / 9007199254740992.0);
        }
        let v = (delta * s).round() as i64;
        let c = clip as i64;
        v.clamp(-c, c)
    }

    /// Signed noise vector of length `n`.
    pub fn error_vec_signed(&mut self, n: usize, delta: f64, clip: u64) -> Vec<i64> {
        (0..n).map(|_| self.error_value(delta, clip)).collect()
    }

    /// Noise polynomial with coefficients lifted into `[0, q)`.
    pub fn error_poly(&mut self, n: usize, q: Modulus, delta: f64, clip: u64) -> Poly {
        let signed = self.error_vec_signed(n, delta, clip);
        Poly::from_signed(&signed, q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::trace::trace_capture;

    #[test]
    fn seeded_streams_are_reproducible() {
        let mut a = RandomStream::from_u64_seed(99);
        let mut b = RandomStream::from_u64_seed(99);
        let wa: Vec<u64> = (0..32).map(|_| a.next_word()).collect();
        let wb: Vec<u64> = (0..32).map(|_| b.next_word()).collect();
        assert_eq!(wa, wb);

        let mut c = RandomStream::from_u64_seed(100);
        let wc: Vec<u64> = (0..32).map(|_| c.next_word()).collect();
        assert_ne!(wa, wc);
    }

    #[test]
    fn uniform_residues_are_balanced() {
        let q = Modulus::new(17).unwrap();
        let mut s = RandomStream::from_u64_seed(2024);
        let n = 100_000usize;
        let mut counts = [0u64; 17];
        for _ in 0..n {
            let v = s.uniform_mod(q);
            assert!(v < 17);
            counts[v as usize] += 1;
        }
        // Binomial(n, 1/17): five standard deviations around the mean.
        let p = 1.0 / 17.0;
        let mean = n as f64 * p;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for (r, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - mean).abs() < 5.0 * sigma,
                "residue {r}: count {c}, expected {mean:.0} +/- {:.0}",
                5.0 * sigma
            );
        }
    }

    #[test]
    fn ternary_values_and_balance() {
        let q = Modulus::new(3329).unwrap();
        let mut s = RandomStream::from_u64_seed(5);
        let n = 100_000usize;
        let mut counts = [0u64; 3];
        for _ in 0..n {
            match s.ternary_poly(1, q).coeffs()[0] {
                0 => counts[0] += 1,
                1 => counts[1] += 1,
                3328 => counts[2] += 1,
                other => panic!("non-ternary value {other}"),
            }
        }
        let p = 1.0 / 3.0;
        let mean = n as f64 * p;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for &c in &counts {
            assert!((c as f64 - mean).abs() < 5.0 * sigma);
        }
    }

    #[test]
    fn zero_width_noise_is_all_zero() {
        let q = Modulus::new(3329).unwrap();
        let mut s = RandomStream::from_u64_seed(1);
        let p = s.error_poly(64, q, 0.0, 20);
        assert!(p.coeffs().iter().all(|&c| c == 0));
    }

    #[test]
    fn noise_moments_match_the_distribution() {
        let mut s = RandomStream::from_u64_seed(31337);
        let n = 100_000usize;
        let vals = s.error_vec_signed(n, 3.2, 20);
        assert!(vals.iter().all(|&v| v.abs() <= 20));
        let mean = vals.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        let var = vals.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n as f64;
        // Target: mean 0, variance delta^2 + 1/12 from rounding (~10.32).
        assert!(mean.abs() < 0.06, "mean {mean}");
        assert!((9.8..=10.9).contains(&var), "variance {var}");
    }

    #[test]
    fn clipping_engages_for_wide_noise() {
        let mut s = RandomStream::from_u64_seed(8);
        let vals = s.error_vec_signed(50_000, 10.0, 20);
        assert!(vals.iter().all(|&v| v.abs() <= 20));
        let at_clip = vals.iter().filter(|&&v| v.abs() == 20).count();
        // With delta = 10 roughly 5% of mass sits beyond +/-20.
        assert!(at_clip > 500, "clip count {at_clip}");
    }

    #[test]
    fn word_draws_are_traced() {
        let mut s = RandomStream::from_u64_seed(3);
        let (t, _) = trace_capture("draws", || {
            let _ = s.next_word();
            let _ = s.next_word();
        });
        assert_eq!(t.len(), 2);

        // Noise sampling burns exactly 12 words per coefficient.
        let (t, _) = trace_capture("noise", || {
            let _ = s.error_vec_signed(4, 3.2, 20);
        });
        assert_eq!(t.len(), 48);
    }
}
