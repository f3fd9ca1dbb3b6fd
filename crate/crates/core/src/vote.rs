//! Signed validator votes and their fixed-layout wire format.

use crate::crypto::{self, mimc_hash_n, CryptoError, CurvePoint, FieldElement, KeyPair, Signature};

/// `(validatorIndex, requestId, blockHash)` signed by the validator. A zero
/// block hash means "absent or not final".
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Vote {
    pub validator_index: u64,
    pub request_id: u64,
    pub block_hash: FieldElement,
    pub signature: Signature,
}

/// The signed message `MiMC(index, requestId, blockHash)`.
pub fn vote_message(
    validator_index: u64,
    request_id: u64,
    block_hash: &FieldElement,
) -> FieldElement {
    mimc_hash_n([
        FieldElement::from_u64(validator_index),
        FieldElement::from_u64(request_id),
        *block_hash,
    ])
}

impl Vote {
    pub const WIRE_BYTES: usize = 8 + 8 + 32 + Signature::BYTES;

    pub fn new(
        keys: &KeyPair,
        validator_index: u64,
        request_id: u64,
        block_hash: FieldElement,
    ) -> Vote {
        let msg = vote_message(validator_index, request_id, &block_hash);
        let signature = crypto::sign(&keys.secret, &msg).expect("key pair secret is non-zero");
        Vote {
            validator_index,
            request_id,
            block_hash,
            signature,
        }
    }

    pub fn message(&self) -> FieldElement {
        vote_message(self.validator_index, self.request_id, &self.block_hash)
    }

    /// True iff the signature verifies under `pubkey`; malformed points count as invalid.
    pub fn verify(&self, pubkey: &CurvePoint) -> bool {
        crypto::verify(pubkey, &self.message(), &self.signature).unwrap_or(false)
    }

    /// `index (8 BE) ‖ requestId (8 BE) ‖ blockHash (32) ‖ signature (96)`.
    pub fn to_bytes(&self) -> [u8; Self::WIRE_BYTES] {
        let mut out = [0u8; Self::WIRE_BYTES];
        out[..8].copy_from_slice(&self.validator_index.to_be_bytes());
        out[8..16].copy_from_slice(&self.request_id.to_be_bytes());
        out[16..48].copy_from_slice(&self.block_hash.to_bytes());
        out[48..].copy_from_slice(&self.signature.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Vote, CryptoError> {
        if bytes.len() != Self::WIRE_BYTES {
            return Err(CryptoError::InvalidLength {
                expected: Self::WIRE_BYTES,
                actual: bytes.len(),
            });
        }
        let u64_at = |at: usize| u64::from_be_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
        Ok(Vote {
            validator_index: u64_at(0),
            request_id: u64_at(8),
            block_hash: FieldElement::from_bytes(&bytes[16..48])?,
            signature: Signature::from_bytes(&bytes[48..])?,
        })
    }
}
