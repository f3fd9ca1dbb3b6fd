//! The aggregation and slashing circuits as constraint-checked transition
//! functions, their witness builders, and the proof backend interface.
//!
//! A circuit check never returns an error: every assertion is evaluated, the
//! first failing site is recorded, and the constraint count depends only on
//! the circuit parameters (never on witness values).

mod aggregation;
mod backend;
pub mod cost;
mod encoding;
mod gadgets;
mod slash;

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::crypto::FieldElement;
use crate::tree::TreeError;

pub use aggregation::{
    assemble_aggregation, build_aggregation_witness, check_aggregation, AccountWitness,
    AggregationPublic, AggregationWitness, RotationInput, RotationPublic, VoteWitness,
};
pub use backend::{
    backend_by_id, run_circuit, CircuitKind, Proof, ProofBackend, PublicInputs, TransparentBackend,
    Witness,
};
pub use encoding::{
    decode_instance, decode_public, decode_witness, encode_instance, encode_public, encode_witness,
};
pub use slash::{build_slash_witness, check_slash, SlashPublic, SlashWitness};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CircuitError {
    #[error("unknown proof backend {0:?}")]
    UnknownBackend(String),
    #[error("unknown circuit {0:?}")]
    UnknownCircuit(String),
    #[error("public inputs or witness belong to a different circuit")]
    KindMismatch,
    #[error("expected exactly {expected} votes, got {actual}")]
    WrongVoteCount { expected: usize, actual: usize },
    #[error("votes disagree on request or block hash")]
    MixedVotes,
    #[error("vote is not slashable: {0}")]
    NotSlashable(&'static str),
    #[error("randomized rotation input missing or unexpected")]
    RotationMismatch,
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("instance encoding: {0}")]
    Encoding(String),
}

/// Fixed circuit parameters; together they play the role of a verifying key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CircuitParams {
    pub depth: u32,
    /// Exact number of votes per aggregation instance.
    pub threshold: usize,
    pub agg_reward: u128,
    pub val_reward: u128,
    /// Whether the aggregation circuit also proves the randomized seed update.
    pub rotation: bool,
}

/// Majority threshold `floor(n/2) + 1` over the tree capacity `n = 2^depth`.
pub fn majority_threshold(depth: u32) -> usize {
    (1usize << depth) / 2 + 1
}

impl CircuitParams {
    pub fn new(depth: u32, agg_reward: u128, val_reward: u128) -> Self {
        CircuitParams {
            depth,
            threshold: majority_threshold(depth),
            agg_reward,
            val_reward,
            rotation: false,
        }
    }

    pub fn capacity(&self) -> u64 {
        1u64 << self.depth
    }
}

/// Result of running a circuit over (public inputs, witness).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintReport {
    pub ok: bool,
    pub constraint_count: u64,
    pub failure_site: Option<&'static str>,
}

/// Bits per public-input limb of the validator bit vector. Limbs stay well
/// below the field modulus so the in-circuit sum of powers of two never wraps.
pub const BITS_PER_LIMB: usize = 248;

/// The `n`-bit vector of validators whose votes back a submission.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ValidatorBits(BigUint);

impl ValidatorBits {
    pub fn new() -> Self {
        ValidatorBits(BigUint::zero())
    }

    pub fn from_indices<I: IntoIterator<Item = u64>>(indices: I) -> Self {
        let mut bits = Self::new();
        for i in indices {
            bits.set(i);
        }
        bits
    }

    pub fn set(&mut self, index: u64) {
        self.0.set_bit(index, true);
    }

    pub fn contains(&self, index: u64) -> bool {
        self.0.bit(index)
    }

    pub fn count(&self) -> u64 {
        self.0.count_ones()
    }

    /// Set positions in ascending order.
    pub fn indices(&self) -> Vec<u64> {
        (0..self.0.bits()).filter(|&i| self.0.bit(i)).collect()
    }

    /// True iff the vector fits in `capacity` bits.
    pub fn fits(&self, capacity: u64) -> bool {
        self.0.bits() <= capacity
    }

    pub fn as_biguint(&self) -> &BigUint {
        &self.0
    }

    pub fn limb_count(capacity: u64) -> usize {
        (capacity as usize).div_ceil(BITS_PER_LIMB)
    }

    /// Little-endian limbs of `BITS_PER_LIMB` bits covering `capacity` bits.
    pub fn to_limbs(&self, capacity: u64) -> Vec<FieldElement> {
        let mask = (BigUint::one() << BITS_PER_LIMB) - 1u32;
        (0..Self::limb_count(capacity))
            .map(|k| FieldElement::from_biguint(&((&self.0 >> (k * BITS_PER_LIMB)) & &mask)))
            .collect()
    }

    pub fn from_limbs(limbs: &[FieldElement]) -> Self {
        let value = limbs
            .iter()
            .enumerate()
            .fold(BigUint::zero(), |acc, (k, l)| {
                acc | (l.to_biguint() << (k * BITS_PER_LIMB))
            });
        ValidatorBits(value)
    }
}

impl fmt::Display for ValidatorBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for ValidatorBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ValidatorBits({:?})", self.indices())
    }
}

impl FromStr for ValidatorBits {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<BigUint>()
            .map(ValidatorBits)
            .map_err(|_| format!("bad validator bit vector {s:?}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_over_capacity() {
        assert_eq!(majority_threshold(1), 2);
        assert_eq!(majority_threshold(2), 3);
        assert_eq!(majority_threshold(3), 5);
        assert_eq!(majority_threshold(8), 129);
    }

    #[test]
    fn bits_from_indices() {
        let b = ValidatorBits::from_indices([0, 2]);
        assert_eq!(b.to_string(), "5");
        assert_eq!(b.count(), 2);
        assert_eq!(b.indices(), vec![0, 2]);
        assert!(b.fits(3) && !b.fits(2));
    }

    #[test]
    fn limbs_round_trip_at_256() {
        let b = ValidatorBits::from_indices([0, 247, 248, 255]);
        let limbs = b.to_limbs(256);
        assert_eq!(limbs.len(), 2);
        assert_eq!(limbs[1], FieldElement::from_u64(1 + (1 << 7)));
        assert_eq!(ValidatorBits::from_limbs(&limbs), b);
        assert_eq!(ValidatorBits::limb_count(4), 1);
    }
}
