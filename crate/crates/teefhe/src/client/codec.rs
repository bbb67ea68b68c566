//! Fixed-point encoding of real scalars into the plaintext space.
//!
//! A value `x` is stored as `round(x · scale) mod t` with the usual
//! centered interpretation: residues above `t/2` are negative. Encoding
//! requires `|x · scale| < t/2`, and a decode of an encode is within
//! `1/(2·scale)` of the original value.

use crate::error::{Error, Result};

/// Scalar fixed-point codec with a power-of-two scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FixedPointCodec {
    scale: u64,
    t: u64,
}

/// The default scale, 2^10.
pub const DEFAULT_SCALE: u64 = 1 << 10;

impl FixedPointCodec {
    /// Creates a codec. `scale` must be a power of two smaller than `t`.
    pub fn new(scale: u64, t: u64) -> Result<Self> {
        if scale == 0 || !scale.is_power_of_two() {
            return Err(Error::InvalidParameters(format!(
                "codec scale {scale} must be a power of two"
            )));
        }
        if t < 2 || scale >= t {
            return Err(Error::InvalidParameters(format!(
                "codec scale {scale} must be smaller than the plain modulus {t}"
            )));
        }
        Ok(FixedPointCodec { scale, t })
    }

    /// Codec with the default 2^10 scale.
    pub fn default_for(t: u64) -> Result<Self> {
        Self::new(DEFAULT_SCALE, t)
    }

    /// The scale factor.
    pub fn scale(&self) -> u64 {
        self.scale
    }

    /// The plaintext modulus.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// Smallest representable step.
    pub fn resolution(&self) -> f64 {
        1.0 / self.scale as f64
    }

    /// Quantizes `x` to an integer at the codec scale, checking range.
    pub fn quantize(&self, x: f64) -> Result<i64> {
        if !x.is_finite() {
            return Err(Error::InvalidParameters(format!(
                "cannot encode non-finite value {x}"
            )));
        }
        let scaled = (x * self.scale as f64).round();
        if 2.0 * scaled.abs() >= self.t as f64 {
            return Err(Error::InvalidParameters(format!(
                "value {x} overflows the plain modulus at scale {}",
                self.scale
            )));
        }
        Ok(scaled as i64)
    }

    /// Encodes a quantized integer as a residue mod `t`.
    pub fn from_quantized(&self, q: i64) -> Result<u64> {
        if 2 * q.unsigned_abs() >= self.t {
            return Err(Error::InvalidParameters(format!(
                "quantized value {q} overflows the plain modulus {}",
                self.t
            )));
        }
        Ok((q as i128).rem_euclid(self.t as i128) as u64)
    }

    /// Encodes a real value: `round(x · scale) mod t`.
    pub fn encode(&self, x: f64) -> Result<u64> {
        self.from_quantized(self.quantize(x)?)
    }

    /// Centers a residue into `(-t/2, t/2]`.
    pub fn center(&self, e: u64) -> i64 {
        let e = e % self.t;
        if 2 * e > self.t {
            e as i64 - self.t as i64
        } else {
            e as i64
        }
    }

    /// Decodes a residue back to a real value.
    pub fn decode(&self, e: u64) -> f64 {
        self.center(e) as f64 / self.scale as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_error_is_within_half_a_step() {
        let codec = FixedPointCodec::new(1 << 10, 1 << 17).unwrap();
        for i in -500..=500 {
            let x = i as f64 * 0.1271;
            if x.abs() * 1024.0 >= 65536.0 {
                continue;
            }
            let e = codec.encode(x).unwrap();
            assert!(e < 1 << 17);
            let back = codec.decode(e);
            assert!(
                (back - x).abs() <= 0.5 / 1024.0 + 1e-12,
                "x={x} back={back}"
            );
        }
    }

    #[test]
    fn negative_values_use_the_upper_residues() {
        let codec = FixedPointCodec::new(4, 256).unwrap();
        assert_eq!(codec.encode(-1.0).unwrap(), 252);
        assert_eq!(codec.decode(252), -1.0);
        assert_eq!(codec.encode(1.25).unwrap(), 5);
        assert_eq!(codec.center(5), 5);
    }

    #[test]
    fn rejects_bad_shapes_and_overflow() {
        assert!(FixedPointCodec::new(3, 256).is_err(), "non power of two");
        assert!(FixedPointCodec::new(0, 256).is_err());
        assert!(FixedPointCodec::new(256, 256).is_err(), "scale >= t");
        let codec = FixedPointCodec::new(4, 256).unwrap();
        assert!(codec.encode(32.0).is_err(), "32*4 = 128 >= t/2");
        assert!(codec.encode(31.7).is_ok(), "31.7*4 rounds to 127 < t/2");
        assert!(codec.encode(f64::NAN).is_err());
        assert!(codec.from_quantized(128).is_err());
        assert!(codec.from_quantized(-128).is_err());
        assert!(codec.from_quantized(127).is_ok());
    }

    #[test]
    fn default_scale_is_1024() {
        let codec = FixedPointCodec::default_for(1 << 17).unwrap();
        assert_eq!(codec.scale(), 1024);
        assert_eq!(codec.resolution(), 1.0 / 1024.0);
    }
}
