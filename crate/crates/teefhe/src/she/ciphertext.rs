//! The ciphertext container: a short vector of polynomials over `q`.

use crate::error::{Error, Result};
use crate::ring::Poly;

/// A ciphertext of `size ≥ 2` polynomial parts over the coefficient modulus.
///
/// Fresh encryptions have size 2 and decrypt under the secret `s` via
/// `c0 + c1·s`. A multiplication produces size 3 (decrypting via
/// `c0 + c1·s + c2·s²`) until relinearization folds it back to size 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Ciphertext {
    params_id: u64,
    parts: Vec<Poly>,
}

impl Ciphertext {
    /// Assembles a ciphertext from its parts, which must be non-empty and
    /// share a single modulus and degree.
    pub(crate) fn from_parts(params_id: u64, parts: Vec<Poly>) -> Result<Self> {
        if parts.len() < 2 {
            return Err(Error::InvalidParameters(format!(
                "ciphertext needs at least 2 parts, got {}",
                parts.len()
            )));
        }
        let first = &parts[0];
        for part in &parts[1..] {
            if part.modulus() != first.modulus() || part.len() != first.len() {
                return Err(Error::ParameterMismatch(
                    "ciphertext parts disagree on ring".into(),
                ));
            }
        }
        Ok(Self { params_id, parts })
    }

    /// Identity of the parameter set this ciphertext was produced under.
    pub fn params_id(&self) -> u64 {
        self.params_id
    }

    /// Number of polynomial parts.
    pub fn size(&self) -> usize {
        self.parts.len()
    }

    /// Ring degree.
    pub fn len(&self) -> usize {
        self.parts[0].len()
    }

    /// True when the ring degree is zero (never for valid parameter sets).
    pub fn is_empty(&self) -> bool {
        self.parts[0].is_empty()
    }

    /// Borrow part `i`.
    pub fn part(&self, i: usize) -> &Poly {
        &self.parts[i]
    }

    /// Borrow all parts.
    pub fn parts(&self) -> &[Poly] {
        &self.parts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::Modulus;

    #[test]
    fn rejects_short_or_mismatched_parts() {
        let q = Modulus::new(17).unwrap();
        let a = Poly::zero(4, q);
        assert!(Ciphertext::from_parts(1, vec![a.clone()]).is_err());
        let other = Poly::zero(4, Modulus::new(97).unwrap());
        assert!(Ciphertext::from_parts(1, vec![a.clone(), other]).is_err());
        let short = Poly::zero(2, q);
        assert!(Ciphertext::from_parts(1, vec![a.clone(), short]).is_err());
        let ok = Ciphertext::from_parts(7, vec![a.clone(), a]).unwrap();
        assert_eq!(ok.size(), 2);
        assert_eq!(ok.len(), 4);
        assert_eq!(ok.params_id(), 7);
    }
}
