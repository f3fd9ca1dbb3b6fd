//! Constraint accounting. One unit per field multiplication-equivalent: each
//! MiMC round costs 3, each curve addition 7, each equality assertion 1.
//! Additions are free. Only relative scaling is meaningful.

use crate::crypto::mimc::MIMC_ROUNDS;
use crate::crypto::SCALAR_BITS;

use super::{CircuitParams, ValidatorBits};

pub const MIMC_ROUND: u64 = 3;
pub const PERMUTATION: u64 = MIMC_ROUNDS as u64 * MIMC_ROUND;
pub const CURVE_ADD: u64 = 7;
pub const ASSERT: u64 = 1;
/// Curve equation check `a·x² + y² = 1 + d·x²·y²`.
pub const ON_CURVE: u64 = 3;
/// Fixed double-and-add ladder over every scalar bit.
pub const SCALAR_MUL: u64 = SCALAR_BITS as u64 * 2 * CURVE_ADD;

pub fn hash(inputs: u64) -> u64 {
    inputs * PERMUTATION
}

/// Challenge hash, range check of `s`, `s·G`, `c·pk`, one addition and the
/// coordinate-wise equality.
pub const SIGNATURE: u64 =
    2 * ON_CURVE + 5 * PERMUTATION + SCALAR_BITS as u64 + 2 * SCALAR_MUL + CURVE_ADD + 2 * ASSERT;

/// Re-hashing one leaf and folding it up `depth` levels (one selector per level).
pub fn path_update(depth: u32) -> u64 {
    hash(4) + u64::from(depth) * (1 + hash(2))
}

/// Leaf preimage check, index/direction binding, path fold and root equality.
pub fn membership(depth: u32) -> u64 {
    hash(4) + ASSERT + u64::from(depth) + ASSERT + u64::from(depth) * (1 + hash(2)) + ASSERT
}

pub fn rotation() -> u64 {
    ON_CURVE + 2 * SCALAR_MUL + 4 * ASSERT
}

pub fn aggregation(params: &CircuitParams) -> u64 {
    let t = params.threshold as u64;
    let d = params.depth;
    let duplicates = t * t.saturating_sub(1);
    let aggregator = ASSERT + membership(d) + path_update(d);
    let per_vote = membership(d) + hash(3) + SIGNATURE + ASSERT + 1 + path_update(d);
    let limbs = ValidatorBits::limb_count(params.capacity()) as u64;
    let rotation = if params.rotation { rotation() } else { 0 };
    duplicates + aggregator + t * per_vote + limbs + ASSERT + rotation
}

pub fn slash(params: &CircuitParams) -> u64 {
    let d = params.depth;
    3 * ASSERT
        + membership(d)
        + hash(3)
        + SIGNATURE
        + path_update(d)
        + membership(d)
        + path_update(d)
        + 2 * ASSERT
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregation_affine_in_threshold() {
        let at = |t: usize| {
            let mut p = CircuitParams::new(6, 50, 10);
            p.threshold = t;
            aggregation(&p) - (t as u64) * (t as u64).saturating_sub(1)
        };
        assert_eq!(at(3) - at(2), at(9) - at(8));
    }

    #[test]
    fn slash_depends_on_depth_only() {
        let mut a = CircuitParams::new(5, 50, 10);
        let b = CircuitParams::new(5, 1, 1);
        a.threshold = 2;
        assert_eq!(slash(&a), slash(&b));
        assert!(slash(&CircuitParams::new(6, 50, 10)) > slash(&b));
    }
}
