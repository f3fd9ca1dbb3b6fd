use crate::crypto::{self, mimc_hash_n, CurvePoint, FieldElement, Scalar, Signature};
use crate::tree::{node_hash, Account, MerkleProof};

use super::{cost, ConstraintReport};

/// Executes circuit logic while counting constraints and remembering the
/// first failed assertion.
#[derive(Debug, Default)]
pub(crate) struct Tracer {
    count: u64,
    failure: Option<&'static str>,
}

impl Tracer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, n: u64) {
        self.count += n;
    }

    pub fn assert(&mut self, site: &'static str, holds: bool) {
        self.count += cost::ASSERT;
        if !holds && self.failure.is_none() {
            self.failure = Some(site);
        }
    }

    pub fn hash<const N: usize>(&mut self, inputs: [FieldElement; N]) -> FieldElement {
        self.count += cost::hash(N as u64);
        mimc_hash_n(inputs)
    }

    pub fn leaf(&mut self, account: &Account) -> FieldElement {
        self.hash([
            FieldElement::from_u64(account.index),
            account.pubkey.x,
            account.pubkey.y,
            account.balance,
        ])
    }

    /// Folds `leaf` along the siblings and direction bits of `proof`.
    pub fn fold(&mut self, leaf: FieldElement, proof: &MerkleProof) -> FieldElement {
        let mut h = leaf;
        for (sibling, &right) in proof.path.iter().zip(&proof.directions) {
            self.charge(1);
            self.count += cost::hash(2);
            h = if right {
                node_hash(*sibling, h)
            } else {
                node_hash(h, *sibling)
            };
        }
        h
    }

    /// `verifyMerkleProof(root, proof)` for the leaf preimage `account`.
    pub fn membership(
        &mut self,
        site: &'static str,
        root: FieldElement,
        account: &Account,
        proof: &MerkleProof,
    ) {
        let leaf = self.leaf(account);
        self.assert(site, leaf == proof.leaf);
        self.charge(proof.directions.len() as u64);
        self.assert(site, proof.index() == account.index);
        let computed = self.fold(leaf, proof);
        self.assert(site, computed == root);
    }

    /// Re-hashes the updated account into the same path and returns the new root.
    pub fn path_update(&mut self, account: &Account, proof: &MerkleProof) -> FieldElement {
        let leaf = self.leaf(account);
        self.fold(leaf, proof)
    }

    pub fn signature(
        &mut self,
        site: &'static str,
        pk: &CurvePoint,
        msg: &FieldElement,
        sig: &Signature,
    ) {
        self.charge(cost::SIGNATURE - 2 * cost::ASSERT);
        let valid = crypto::verify(pk, msg, sig).unwrap_or(false);
        // Coordinate-wise equality of s·G and R + c·pk.
        self.assert(site, valid);
        self.assert(site, valid);
    }

    /// Proves knowledge of `secret` with `pk = secret·G` and `next = secret·seed`.
    pub fn rotation(
        &mut self,
        site: &'static str,
        pk: &CurvePoint,
        secret: &Scalar,
        seed: &CurvePoint,
        next: &CurvePoint,
    ) {
        self.charge(cost::ON_CURVE + 2 * cost::SCALAR_MUL);
        let seed_ok = seed.is_on_curve();
        let derived_pk = CurvePoint::generator().mul(secret);
        let derived_next = if seed_ok {
            seed.mul(secret)
        } else {
            CurvePoint::zero()
        };
        self.assert(site, derived_pk.x == pk.x);
        self.assert(site, derived_pk.y == pk.y);
        self.assert(site, seed_ok && derived_next.x == next.x);
        self.assert(site, seed_ok && derived_next.y == next.y);
    }

    pub fn finish(self) -> ConstraintReport {
        ConstraintReport {
            ok: self.failure.is_none(),
            constraint_count: self.count,
            failure_site: self.failure,
        }
    }
}

/// Report for witnesses whose shape does not match the circuit arity; the
/// count is the fixed circuit size.
pub(crate) fn malformed(constraint_count: u64) -> ConstraintReport {
    ConstraintReport {
        ok: false,
        constraint_count,
        failure_site: Some(SITE_SHAPE),
    }
}

pub const SITE_SHAPE: &str = "witness_shape";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::keygen;
    use crate::tree::StateTree;

    #[test]
    fn membership_matches_tree() {
        let mut t = StateTree::new(3).unwrap();
        let a = Account::new(5, keygen(&[1u8; 32]).public, 100);
        t.set_account(5, a.clone()).unwrap();
        let proof = t.prove(5).unwrap();

        let mut tr = Tracer::new();
        tr.membership("m", t.root(), &a, &proof);
        let report = tr.finish();
        assert!(report.ok);
        assert_eq!(report.constraint_count, cost::membership(3));

        // Same leaf proven at the wrong position is rejected by the index binding.
        let mut tr = Tracer::new();
        let mut moved = a.clone();
        moved.index = 4;
        tr.membership("m", t.root(), &moved, &proof);
        assert_eq!(tr.finish().failure_site, Some("m"));
    }

    #[test]
    fn first_failure_wins() {
        let mut tr = Tracer::new();
        tr.assert("a", true);
        tr.assert("b", false);
        tr.assert("c", false);
        let r = tr.finish();
        assert_eq!(r.failure_site, Some("b"));
        assert_eq!(r.constraint_count, 3);
    }
}
