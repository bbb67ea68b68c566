//! Encryption parameter sets: ring degree, moduli, noise shape, and the
//! relinearization decomposition window, plus named presets.

use std::collections::HashMap;
use std::sync::Mutex;

use once_cell::sync::Lazy;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ring::modulus::largest_prime_congruent;
use crate::ring::Modulus;

/// Smallest supported ring degree.
pub const MIN_DEGREE: usize = 8;
/// Largest supported ring degree.
pub const MAX_DEGREE: usize = 32768;

/// Default standard deviation of the error sampler.
pub const DEFAULT_NOISE_WIDTH: f64 = 3.2;
/// Default clip bound on sampled error magnitudes.
pub const DEFAULT_NOISE_CLIP: u64 = 20;
/// Default relinearization decomposition window, in bits.
pub const DEFAULT_RELIN_WINDOW: u8 = 16;

/// A complete, validated parameter set for the scheme.
///
/// All ciphertexts, keys, and plaintexts carry the identity of the set they
/// were built under (see [`EncryptionParams::params_id`]); operations across
/// mismatched sets are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct EncryptionParams {
    n: usize,
    q: Modulus,
    t: Modulus,
    noise_width: f64,
    noise_clip: u64,
    relin_window: u8,
}

impl EncryptionParams {
    /// Builds a parameter set from explicit components, enforcing every
    /// structural invariant.
    ///
    /// Requirements:
    /// - `n` is a power of two in `[8, 32768]`
    /// - `q` is prime and `q ≡ 1 (mod 2n)` so the ring supports fast
    ///   negacyclic transforms
    /// - `t < q` and the scaling factor `⌊q/t⌋ ≥ 2`
    /// - `relin_window` is in `[1, 62]`
    /// - `noise_width` is finite and non-negative
    pub fn new(
        n: usize,
        q: Modulus,
        t: Modulus,
        noise_width: f64,
        noise_clip: u64,
        relin_window: u8,
    ) -> Result<Self> {
        if !n.is_power_of_two() || !(MIN_DEGREE..=MAX_DEGREE).contains(&n) {
            return Err(Error::InvalidParameters(format!(
                "ring degree {n} must be a power of two in [{MIN_DEGREE}, {MAX_DEGREE}]"
            )));
        }
        if !q.is_prime() {
            return Err(Error::InvalidParameters(format!(
                "coefficient modulus {} is not prime",
                q.value()
            )));
        }
        if !q.supports_ntt(n) {
            return Err(Error::InvalidParameters(format!(
                "coefficient modulus {} is not congruent to 1 mod {}",
                q.value(),
                2 * n
            )));
        }
        if t.value() >= q.value() {
            return Err(Error::InvalidParameters(format!(
                "plaintext modulus {} must be smaller than coefficient modulus {}",
                t.value(),
                q.value()
            )));
        }
        if q.value() / t.value() < 2 {
            return Err(Error::InvalidParameters(format!(
                "scaling factor {} is too small to embed plaintexts",
                q.value() / t.value()
            )));
        }
        if relin_window == 0 || relin_window > 62 {
            return Err(Error::InvalidParameters(format!(
                "relinearization window {relin_window} must be in [1, 62]"
            )));
        }
        if !noise_width.is_finite() || noise_width < 0.0 {
            return Err(Error::InvalidParameters(format!(
                "noise width {noise_width} must be finite and non-negative"
            )));
        }
        Ok(Self { n, q, t, noise_width, noise_clip, relin_window })
    }

    /// Builds a parameter set by searching for the largest prime coefficient
    /// modulus with exactly `q_bits` bits that is congruent to 1 modulo
    /// `congruence`.
    ///
    /// `congruence` must be a multiple of `2n` so the resulting modulus
    /// supports fast transforms; passing a larger multiple (for example a
    /// power-of-two plaintext modulus) additionally pins `q mod congruence`
    /// to 1.
    pub fn with_prime_search(
        n: usize,
        q_bits: u32,
        congruence: u64,
        t: u64,
        noise_width: f64,
        noise_clip: u64,
        relin_window: u8,
    ) -> Result<Self> {
        if n == 0 || congruence % (2 * n as u64) != 0 {
            return Err(Error::InvalidParameters(format!(
                "congruence {congruence} must be a multiple of 2n = {}",
                2 * n
            )));
        }
        let q = largest_prime_congruent(q_bits, congruence)?;
        Self::new(n, q, Modulus::new(t)?, noise_width, noise_clip, relin_window)
    }

    /// Returns the named preset for ring degree `n`.
    ///
    /// Presets exist for `n ∈ {8, 1024, 2048, 4096, 8192}`. The degree-8 set
    /// is a toy configuration for fast tests and worked examples; the others
    /// are desk-scale operating points with power-of-two plaintext moduli.
    pub fn preset(n: usize) -> Result<Self> {
        static CACHE: Lazy<Mutex<HashMap<usize, EncryptionParams>>> =
            Lazy::new(|| Mutex::new(HashMap::new()));
        if let Some(params) = CACHE.lock().expect("preset cache poisoned").get(&n) {
            return Ok(params.clone());
        }
        // (q_bits, congruence, t) per degree. Each congruence is a multiple
        // of 2n, and each power-of-two t divides the congruence so that
        // q ≡ 1 (mod t) and the scaling factor has remainder t - 1.
        let (q_bits, congruence, t) = match n {
            8 => (40, 272, 17),
            1024 => (55, 2048, 1 << 8),
            2048 => (56, 4096, 1 << 10),
            4096 => (54, 8192, 1 << 10),
            8192 => (52, 16384, 1 << 10),
            other => {
                return Err(Error::InvalidParameters(format!(
                    "no preset for ring degree {other}"
                )))
            }
        };
        let params = Self::with_prime_search(
            n,
            q_bits,
            congruence,
            t,
            DEFAULT_NOISE_WIDTH,
            DEFAULT_NOISE_CLIP,
            DEFAULT_RELIN_WINDOW,
        )?;
        CACHE
            .lock()
            .expect("preset cache poisoned")
            .insert(n, params.clone());
        Ok(params)
    }

    /// Ring degree `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Coefficient modulus `q`.
    pub fn q(&self) -> Modulus {
        self.q
    }

    /// Plaintext modulus `t`.
    pub fn t(&self) -> Modulus {
        self.t
    }

    /// Standard deviation of the error sampler.
    pub fn noise_width(&self) -> f64 {
        self.noise_width
    }

    /// Clip bound applied to sampled error magnitudes.
    pub fn noise_clip(&self) -> u64 {
        self.noise_clip
    }

    /// Relinearization decomposition window, in bits.
    pub fn relin_window(&self) -> u8 {
        self.relin_window
    }

    /// The plaintext scaling factor `Δ = ⌊q/t⌋`.
    pub fn scaling_factor(&self) -> u64 {
        self.q.value() / self.t.value()
    }

    /// Number of base-`2^w` digits needed to decompose a coefficient of `q`,
    /// i.e. the number of key pairs in a relinearization key.
    pub fn digit_count(&self) -> usize {
        let w = self.relin_window as u32;
        ((self.q.bits() + w - 1) / w) as usize
    }

    /// A short identifier derived from `(n, q, t)`.
    ///
    /// The identifier deliberately covers only the fields that determine
    /// object compatibility — two parameter sets that agree on `(n, q, t)`
    /// produce interoperable ciphertexts and keys even if their sampler or
    /// decomposition settings differ — and is therefore recomputable from
    /// any serialized object header.
    pub fn params_id(&self) -> u64 {
        compute_params_id(self.n as u32, self.q.value(), self.t.value())
    }
}

/// Computes the truncated `(n, q, t)` identity hash used by
/// [`EncryptionParams::params_id`] and by envelope headers.
pub(crate) fn compute_params_id(n: u32, q: u64, t: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"TFHE-params-v1");
    hasher.update(n.to_le_bytes());
    hasher.update(q.to_le_bytes());
    hasher.update(t.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest at least 8 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_degrees_and_moduli() {
        // Frozen expected moduli: the largest prime with the stated bit
        // length congruent to 1 modulo the stated value, verified against an
        // independent computer-algebra search.
        let cases = [
            (8usize, 40u32, 272u64, 17u64, 1_099_511_625_073u64),
            (1024, 55, 2048, 1 << 8, 36_028_797_018_820_609),
            (2048, 56, 4096, 1 << 10, 72_057_594_037_641_217),
            (4096, 54, 8192, 1 << 10, 18_014_398_509_309_953),
            (8192, 52, 16384, 1 << 10, 4_503_599_627_124_737),
        ];
        for (n, q_bits, congruence, t, expected_q) in cases {
            let params = EncryptionParams::preset(n).expect("preset exists");
            assert_eq!(params.n(), n);
            assert_eq!(params.q().value(), expected_q, "degree {n}");
            assert_eq!(params.q().bits(), q_bits);
            assert_eq!(params.q().value() % congruence, 1);
            assert_eq!(params.t().value(), t);
            assert!(params.q().is_prime());
            assert!(params.q().supports_ntt(n));
            assert_eq!(params.noise_width(), DEFAULT_NOISE_WIDTH);
            assert_eq!(params.noise_clip(), DEFAULT_NOISE_CLIP);
            assert_eq!(params.relin_window(), DEFAULT_RELIN_WINDOW);
        }
    }

    #[test]
    fn preset_rejects_unknown_degree() {
        assert!(EncryptionParams::preset(512).is_err());
        assert!(EncryptionParams::preset(16384).is_err());
    }

    #[test]
    fn scaling_factor_matches_division() {
        let params = EncryptionParams::preset(1024).unwrap();
        assert_eq!(
            params.scaling_factor(),
            params.q().value() / params.t().value()
        );
        // For the power-of-two presets q ≡ 1 (mod t), so q = Δ·t + 1.
        assert_eq!(
            params.scaling_factor() * params.t().value() + 1,
            params.q().value()
        );
    }

    #[test]
    fn digit_count_covers_modulus() {
        let params = EncryptionParams::preset(2048).unwrap();
        // 56-bit modulus with a 16-bit window needs four digits.
        assert_eq!(params.digit_count(), 4);
        let toy = EncryptionParams::preset(8).unwrap();
        // 40-bit modulus, 16-bit window: three digits.
        assert_eq!(toy.digit_count(), 3);
    }

    #[test]
    fn rejects_invalid_shapes() {
        let q = Modulus::new(1_099_511_625_073).unwrap();
        let t = Modulus::new(17).unwrap();
        // Degree not a power of two.
        assert!(EncryptionParams::new(12, q, t, 3.2, 20, 16).is_err());
        // Degree out of range.
        assert!(EncryptionParams::new(4, q, t, 3.2, 20, 16).is_err());
        // Composite modulus.
        let composite = Modulus::new(1_099_511_625_075).unwrap();
        assert!(EncryptionParams::new(8, composite, t, 3.2, 20, 16).is_err());
        // Modulus without transform support for the degree: 97 ≡ 1 (mod 16)
        // fails for n = 8? 97 = 6*16 + 1, so it supports n = 8; use n = 1024.
        let small = Modulus::new(97).unwrap();
        assert!(EncryptionParams::new(1024, small, t, 3.2, 20, 16).is_err());
        // Plaintext modulus too large: scaling factor would collapse to one.
        let big_t = Modulus::new((1_099_511_625_073 >> 1) + 1).unwrap();
        assert!(EncryptionParams::new(8, q, big_t, 3.2, 20, 16).is_err());
        // Zero-width relinearization window.
        assert!(EncryptionParams::new(8, q, t, 3.2, 20, 0).is_err());
        // Negative noise width.
        assert!(EncryptionParams::new(8, q, t, -1.0, 20, 16).is_err());
    }

    #[test]
    fn prime_search_requires_transform_congruence() {
        // Congruence must be a multiple of 2n.
        assert!(EncryptionParams::with_prime_search(8, 40, 8, 17, 3.2, 20, 16).is_err());
        // A custom pairing with a large power-of-two plaintext modulus.
        let custom =
            EncryptionParams::with_prime_search(2048, 56, 1 << 17, 1 << 17, 3.2, 20, 16)
                .expect("custom pairing exists");
        assert_eq!(custom.q().value(), 72_057_594_036_879_361);
        assert_eq!(custom.q().value() % (1 << 17), 1);
        assert_eq!(custom.scaling_factor(), custom.q().value() >> 17);
    }

    #[test]
    fn params_id_depends_on_compatibility_fields_only() {
        let a = EncryptionParams::preset(1024).unwrap();
        let b = EncryptionParams::preset(2048).unwrap();
        assert_ne!(a.params_id(), b.params_id());
        // Sampler settings do not affect the identifier.
        let widened = EncryptionParams::new(
            a.n(),
            a.q(),
            a.t(),
            6.4,
            40,
            8,
        )
        .unwrap();
        assert_eq!(widened.params_id(), a.params_id());
        // But any change to (n, q, t) does.
        let other_t = EncryptionParams::new(a.n(), a.q(), Modulus::new(2).unwrap(), 3.2, 20, 16)
            .unwrap();
        assert_ne!(other_t.params_id(), a.params_id());
        // Stable across calls.
        assert_eq!(a.params_id(), EncryptionParams::preset(1024).unwrap().params_id());
    }
}
