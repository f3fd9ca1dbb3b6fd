//! Field arithmetic, the MiMC hash and EdDSA over the embedded Edwards curve.

mod curve;
mod eddsa;
mod field;
pub mod mimc;

pub use curve::{self_check, CurvePoint, Scalar, EDWARDS_A, EDWARDS_D, SCALAR_BITS};
pub use eddsa::{challenge, keygen, sign, verify, KeyPair, Signature};
pub use field::{modulus, FieldElement, MODULUS_DECIMAL};
pub use mimc::{mimc_hash, mimc_hash_n, mimc_permute};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("secret key out of range")]
    InvalidKey,
    #[error("point is not on the curve")]
    InvalidPoint,
    #[error("non-canonical encoding")]
    NonCanonical,
    #[error("expected {expected} bytes, got {actual}")]
    InvalidLength { expected: usize, actual: usize },
    #[error("parse error: {0}")]
    Parse(String),
}
