//! Elements of the BN254 scalar field, the native field of every hash, key,
//! root and balance in the protocol.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use ark_bn254::Fr;
use ark_ff::{BigInteger, Field, PrimeField};
use num_bigint::BigUint;
use once_cell::sync::Lazy;

use super::CryptoError;

/// Decimal representation of the field modulus `p`.
pub const MODULUS_DECIMAL: &str =
    "21888242871839275222246405745257275088548364400416034343698204186575808495617";

static MODULUS: Lazy<BigUint> = Lazy::new(|| MODULUS_DECIMAL.parse().expect("modulus literal"));

/// The field modulus as a big integer.
pub fn modulus() -> &'static BigUint {
    &MODULUS
}

/// An integer in `[0, p)`. All arithmetic is performed modulo `p`.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldElement(Fr);

impl FieldElement {
    pub const BYTES: usize = 32;

    pub fn zero() -> Self {
        FieldElement(Fr::from(0u64))
    }

    pub fn one() -> Self {
        FieldElement(Fr::from(1u64))
    }

    pub fn from_u64(v: u64) -> Self {
        FieldElement(Fr::from(v))
    }

    pub fn from_u128(v: u128) -> Self {
        FieldElement(Fr::from(v))
    }

    /// Reduces an arbitrary big integer into the field.
    pub fn from_biguint(v: &BigUint) -> Self {
        FieldElement(Fr::from_be_bytes_mod_order(&v.to_bytes_be()))
    }

    /// Reduces an arbitrary big-endian byte string into the field.
    pub fn from_be_bytes_mod_order(bytes: &[u8]) -> Self {
        FieldElement(Fr::from_be_bytes_mod_order(bytes))
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::zero()
    }

    /// Canonical 32-byte big-endian encoding.
    pub fn to_bytes(&self) -> [u8; 32] {
        let bytes = self.0.into_bigint().to_bytes_be();
        let mut out = [0u8; 32];
        out[32 - bytes.len()..].copy_from_slice(&bytes);
        out
    }

    /// Decodes a canonical encoding; values `>= p` are rejected.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != Self::BYTES {
            return Err(CryptoError::InvalidLength {
                expected: Self::BYTES,
                actual: bytes.len(),
            });
        }
        let value = BigUint::from_bytes_be(bytes);
        if value >= *modulus() {
            return Err(CryptoError::NonCanonical);
        }
        Ok(Self::from_biguint(&value))
    }

    pub fn to_biguint(&self) -> BigUint {
        BigUint::from_bytes_be(&self.to_bytes())
    }

    /// Interprets the element as an unsigned integer if it fits in 128 bits.
    pub fn to_u128(&self) -> Option<u128> {
        let bytes = self.to_bytes();
        if bytes[..16].iter().any(|&b| b != 0) {
            return None;
        }
        let mut low = [0u8; 16];
        low.copy_from_slice(&bytes[16..]);
        Some(u128::from_be_bytes(low))
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.to_u128().and_then(|v| u64::try_from(v).ok())
    }

    pub fn square(&self) -> Self {
        FieldElement(self.0.square())
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inverse(&self) -> Option<Self> {
        self.0.inverse().map(FieldElement)
    }

    /// `2^exp` in the field.
    pub fn pow2(exp: u64) -> Self {
        FieldElement(Fr::from(2u64).pow([exp]))
    }

    /// Returns bit `i` (little-endian) of the canonical integer value.
    pub fn bit(&self, i: usize) -> bool {
        self.0.into_bigint().get_bit(i)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_biguint())
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F({})", self.to_biguint())
    }
}

impl FromStr for FieldElement {
    type Err = CryptoError;

    /// Parses a canonical decimal integer in `[0, p)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let value: BigUint = s
            .parse()
            .map_err(|_| CryptoError::Parse(format!("not a decimal integer: {s:?}")))?;
        if value >= *modulus() {
            return Err(CryptoError::NonCanonical);
        }
        Ok(Self::from_biguint(&value))
    }
}

impl From<u64> for FieldElement {
    fn from(v: u64) -> Self {
        Self::from_u64(v)
    }
}

impl From<u128> for FieldElement {
    fn from(v: u128) -> Self {
        Self::from_u128(v)
    }
}

impl Add for FieldElement {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        FieldElement(self.0 + rhs.0)
    }
}

impl AddAssign for FieldElement {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl Sub for FieldElement {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        FieldElement(self.0 - rhs.0)
    }
}

impl SubAssign for FieldElement {
    fn sub_assign(&mut self, rhs: Self) {
        self.0 -= rhs.0;
    }
}

impl Mul for FieldElement {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        FieldElement(self.0 * rhs.0)
    }
}

impl MulAssign for FieldElement {
    fn mul_assign(&mut self, rhs: Self) {
        self.0 *= rhs.0;
    }
}

impl Neg for FieldElement {
    type Output = Self;
    fn neg(self) -> Self {
        FieldElement(-self.0)
    }
}
