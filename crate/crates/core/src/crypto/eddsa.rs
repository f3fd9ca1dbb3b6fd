//! EdDSA over the embedded curve, with MiMC as the challenge and nonce hash
//! so the verification equation can be re-checked inside the circuits.
//!
//! * nonce `k = MiMC(sk, msg) mod l`, re-derived as `MiMC(sk, msg, i)` in the
//!   (negligible) case that it reduces to zero
//! * `R = k·G`, `c = MiMC(R.x, R.y, pk.x, pk.y, msg) mod l`, `s = k + c·sk`
//! * valid iff `s·G = R + c·pk`

use num_bigint::BigUint;
use num_traits::One;

use super::mimc::{mimc_hash, mimc_hash_n};
use super::{CryptoError, CurvePoint, FieldElement, Scalar};

#[derive(Clone, PartialEq, Eq)]
pub struct KeyPair {
    pub secret: Scalar,
    pub public: CurvePoint,
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair")
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Signature {
    pub r: CurvePoint,
    pub s: Scalar,
}

impl Signature {
    pub const BYTES: usize = 96;

    /// `R.x ‖ R.y ‖ s`, each 32 bytes big-endian.
    pub fn to_bytes(&self) -> [u8; 96] {
        let mut out = [0u8; 96];
        out[..64].copy_from_slice(&self.r.to_bytes());
        out[64..].copy_from_slice(&self.s.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != Self::BYTES {
            return Err(CryptoError::InvalidLength {
                expected: Self::BYTES,
                actual: bytes.len(),
            });
        }
        Ok(Signature {
            r: CurvePoint::from_bytes(&bytes[..64])?,
            s: Scalar::from_bytes(&bytes[64..])?,
        })
    }
}

/// Derives a key pair from 32 seed bytes: `sk = (seed mod (l - 1)) + 1`.
pub fn keygen(seed: &[u8; 32]) -> KeyPair {
    let modulus = Scalar::order() - BigUint::one();
    let sk = (BigUint::from_bytes_be(seed) % modulus) + BigUint::one();
    let secret = Scalar::new(sk).expect("sk in [1, l)");
    let public = CurvePoint::generator().mul(&secret);
    KeyPair { secret, public }
}

/// The Fiat-Shamir challenge `MiMC(R.x, R.y, pk.x, pk.y, msg) mod l`.
pub fn challenge(r: &CurvePoint, pk: &CurvePoint, msg: &FieldElement) -> Scalar {
    Scalar::from_field(&mimc_hash_n([r.x, r.y, pk.x, pk.y, *msg]))
}

fn nonce(sk: &Scalar, msg: &FieldElement) -> Scalar {
    let skf = sk.to_field();
    let mut k = Scalar::from_field(&mimc_hash_n([skf, *msg]));
    let mut attempt = 1u64;
    while k.is_zero() {
        let h = mimc_hash(&[skf, *msg, FieldElement::from_u64(attempt)]).expect("non-empty");
        k = Scalar::from_field(&h);
        attempt += 1;
    }
    k
}

pub fn sign(sk: &Scalar, msg: &FieldElement) -> Result<Signature, CryptoError> {
    if sk.is_zero() {
        return Err(CryptoError::InvalidKey);
    }
    let g = CurvePoint::generator();
    let pk = g.mul(sk);
    let k = nonce(sk, msg);
    let r = g.mul(&k);
    let c = challenge(&r, &pk, msg);
    let s = k.add(&c.mul(sk));
    Ok(Signature { r, s })
}

/// Checks `s·G = R + c·pk`. Off-curve `pk` or `R` is an error rather than
/// `false`.
pub fn verify(pk: &CurvePoint, msg: &FieldElement, sig: &Signature) -> Result<bool, CryptoError> {
    if !pk.is_on_curve() || !sig.r.is_on_curve() {
        return Err(CryptoError::InvalidPoint);
    }
    let c = challenge(&sig.r, pk, msg);
    // s·G - c·pk == R
    Ok(CurvePoint::generator().mul_add(&sig.s, &pk.neg(), &c) == sig.r)
}
