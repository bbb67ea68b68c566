//! Plaintexts: polynomials over the plaintext modulus `t`.

use crate::error::{Error, Result};
use crate::ring::{centered, Modulus, Poly};

use super::params::EncryptionParams;

/// A plaintext polynomial with coefficients reduced modulo `t`.
///
/// Plaintexts remember the `(n, q, t)` identity of the parameter set they
/// were encoded under so that mixing objects from different sets is caught
/// at the API boundary rather than producing garbage.
#[derive(Debug, Clone, PartialEq)]
pub struct Plaintext {
    params_id: u64,
    poly: Poly,
}

impl Plaintext {
    /// Encodes unsigned coefficients, reducing each modulo `t`.
    ///
    /// `coeffs` may be shorter than the ring degree; missing coefficients
    /// are zero. Longer inputs are rejected.
    pub fn new(params: &EncryptionParams, coeffs: &[u64]) -> Result<Self> {
        if coeffs.len() > params.n() {
            return Err(Error::InvalidParameters(format!(
                "{} coefficients exceed ring degree {}",
                coeffs.len(),
                params.n()
            )));
        }
        let mut full = vec![0u64; params.n()];
        full[..coeffs.len()].copy_from_slice(coeffs);
        Ok(Self {
            params_id: params.params_id(),
            poly: Poly::from_coeffs(full, params.t()),
        })
    }

    /// Encodes signed coefficients, lifting negatives into `[0, t)`.
    pub fn from_signed(params: &EncryptionParams, coeffs: &[i64]) -> Result<Self> {
        if coeffs.len() > params.n() {
            return Err(Error::InvalidParameters(format!(
                "{} coefficients exceed ring degree {}",
                coeffs.len(),
                params.n()
            )));
        }
        let mut full = vec![0i64; params.n()];
        full[..coeffs.len()].copy_from_slice(coeffs);
        Ok(Self {
            params_id: params.params_id(),
            poly: Poly::from_signed(&full, params.t()),
        })
    }

    /// Encodes a single signed value in coefficient 0 (a constant
    /// polynomial).
    pub fn constant(params: &EncryptionParams, value: i64) -> Result<Self> {
        Self::from_signed(params, &[value])
    }

    /// The all-zero plaintext.
    pub fn zero(params: &EncryptionParams) -> Result<Self> {
        Self::new(params, &[])
    }

    /// Identity of the parameter set this plaintext was encoded under.
    pub fn params_id(&self) -> u64 {
        self.params_id
    }

    /// The plaintext modulus.
    pub fn modulus(&self) -> Modulus {
        self.poly.modulus()
    }

    /// Ring degree.
    pub fn len(&self) -> usize {
        self.poly.len()
    }

    /// True when the ring degree is zero (never for valid parameter sets).
    pub fn is_empty(&self) -> bool {
        self.poly.is_empty()
    }

    /// Coefficients in `[0, t)`.
    pub fn coeffs(&self) -> &[u64] {
        self.poly.coeffs()
    }

    /// Coefficients lifted to the centered interval around zero.
    pub fn centered(&self) -> Vec<i64> {
        self.poly.centered()
    }

    /// The value of coefficient 0, centered — convenient for constant
    /// plaintexts.
    pub fn constant_value(&self) -> i64 {
        centered(self.poly.coeffs()[0], self.poly.modulus().value())
    }

    /// True when every coefficient is zero.
    pub fn is_zero(&self) -> bool {
        self.poly.coeffs().iter().all(|&c| c == 0)
    }

    /// The underlying polynomial over `t`.
    pub(crate) fn poly(&self) -> &Poly {
        &self.poly
    }

    /// Rebuilds a plaintext from a polynomial already reduced modulo `t`.
    pub(crate) fn from_poly(params_id: u64, poly: Poly) -> Self {
        Self { params_id, poly }
    }
}
