use crate::crypto::{CurvePoint, FieldElement, Scalar, Signature};
use crate::tree::{Account, MerkleProof, StateTree};
use crate::vote::Vote;

use super::gadgets::{malformed, Tracer};
use super::{cost, CircuitError, CircuitParams, ConstraintReport, ValidatorBits, BITS_PER_LIMB};

/// Public inputs of the aggregation circuit.
///
/// `aggregator_index` binds the reward recipient to the aggregator the
/// contract expects; `rotation` is present only in randomized-selection mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregationPublic {
    pub pre_state_root: FieldElement,
    pub post_state_root: FieldElement,
    pub block_hash: FieldElement,
    pub request_id: u64,
    pub aggregator_index: u64,
    pub validator_bits: ValidatorBits,
    pub rotation: Option<RotationPublic>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RotationPublic {
    pub seed: CurvePoint,
    pub next_seed: CurvePoint,
}

/// What the aggregator needs to prove a randomized seed update.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RotationInput {
    pub seed: CurvePoint,
    pub secret: Scalar,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccountWitness {
    pub account: Account,
    pub proof: MerkleProof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteWitness {
    pub account: Account,
    pub merkle_proof: MerkleProof,
    pub signature: Signature,
    pub claimed_block_hash: FieldElement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregationWitness {
    pub aggregator: AccountWitness,
    /// Exactly `threshold` entries.
    pub votes: Vec<VoteWitness>,
    pub aggregator_secret: Option<Scalar>,
}

pub(crate) const SITE_DUPLICATE: &str = "duplicate_index";
pub(crate) const SITE_AGG_INDEX: &str = "aggregator_index";
pub(crate) const SITE_AGG_MEMBERSHIP: &str = "aggregator_membership";
pub(crate) const SITE_ROTATION: &str = "rotation";
pub(crate) const SITE_VOTE_MEMBERSHIP: &str = "vote_membership";
pub(crate) const SITE_VOTE_SIGNATURE: &str = "vote_signature";
pub(crate) const SITE_VOTE_HASH: &str = "vote_block_hash";
pub(crate) const SITE_BITS: &str = "validator_bits";
pub(crate) const SITE_POST_ROOT: &str = "post_state_root";

fn well_formed(
    params: &CircuitParams,
    public: &AggregationPublic,
    witness: &AggregationWitness,
) -> bool {
    let depth = params.depth as usize;
    let proof_ok = |p: &MerkleProof| p.path.len() == depth && p.directions.len() == depth;
    witness.votes.len() == params.threshold
        && proof_ok(&witness.aggregator.proof)
        && witness.votes.iter().all(|v| proof_ok(&v.merkle_proof))
        && public.validator_bits.fits(params.capacity())
        && public.rotation.is_some() == params.rotation
        && witness.aggregator_secret.is_some() == params.rotation
}

/// Runs the aggregation circuit.
///
/// Order of checks: pairwise-distinct vote indices; aggregator binding and
/// membership against the pre-state root; aggregator reward and intermediate
/// root; per vote membership against the running root, signature over
/// `MiMC(index, request, blockHash)`, hash agreement, reward, bit
/// accumulation and root update; finally the bit vector and post-state root.
pub fn check_aggregation(
    params: &CircuitParams,
    public: &AggregationPublic,
    witness: &AggregationWitness,
) -> ConstraintReport {
    if !well_formed(params, public, witness) {
        return malformed(cost::aggregation(params));
    }
    let mut tr = Tracer::new();
    let votes = &witness.votes;

    for (i, a) in votes.iter().enumerate() {
        for (j, b) in votes.iter().enumerate() {
            if i != j {
                tr.assert(SITE_DUPLICATE, a.account.index != b.account.index);
            }
        }
    }

    let agg = &witness.aggregator;
    tr.assert(SITE_AGG_INDEX, agg.account.index == public.aggregator_index);
    tr.membership(
        SITE_AGG_MEMBERSHIP,
        public.pre_state_root,
        &agg.account,
        &agg.proof,
    );
    let mut rewarded = agg.account.clone();
    rewarded.balance += FieldElement::from_u128(params.agg_reward);
    let mut root = tr.path_update(&rewarded, &agg.proof);

    if let (Some(rot), Some(secret)) = (&public.rotation, &witness.aggregator_secret) {
        tr.rotation(
            SITE_ROTATION,
            &agg.account.pubkey,
            secret,
            &rot.seed,
            &rot.next_seed,
        );
    }

    let capacity = params.capacity();
    let mut limbs = vec![FieldElement::zero(); ValidatorBits::limb_count(capacity)];
    let request = FieldElement::from_u64(public.request_id);
    for v in votes {
        tr.membership(SITE_VOTE_MEMBERSHIP, root, &v.account, &v.merkle_proof);
        let msg = tr.hash([
            FieldElement::from_u64(v.account.index),
            request,
            public.block_hash,
        ]);
        tr.signature(SITE_VOTE_SIGNATURE, &v.account.pubkey, &msg, &v.signature);
        tr.assert(SITE_VOTE_HASH, v.claimed_block_hash == public.block_hash);

        let mut rewarded = v.account.clone();
        rewarded.balance += FieldElement::from_u128(params.val_reward);
        tr.charge(1);
        let idx = v.account.index;
        if idx < capacity {
            let limb = idx as usize / BITS_PER_LIMB;
            limbs[limb] += FieldElement::pow2((idx as usize % BITS_PER_LIMB) as u64);
        }
        root = tr.path_update(&rewarded, &v.merkle_proof);
    }

    for (actual, declared) in limbs.iter().zip(public.validator_bits.to_limbs(capacity)) {
        tr.assert(SITE_BITS, *actual == declared);
    }
    tr.assert(SITE_POST_ROOT, root == public.post_state_root);
    tr.finish()
}

/// Lays out a witness for `votes` in the given order, with proofs taken in
/// circuit execution order against a working copy of `tree`. No validation:
/// callers can use this to construct deliberately unsatisfying instances.
pub fn assemble_aggregation(
    params: &CircuitParams,
    tree: &StateTree,
    aggregator_index: u64,
    votes: &[Vote],
    request_id: u64,
    block_hash: FieldElement,
    rotation: Option<&RotationInput>,
) -> Result<(AggregationPublic, AggregationWitness), CircuitError> {
    let mut work = tree.clone();
    let pre_state_root = work.root();

    let aggregator = AccountWitness {
        account: work.account(aggregator_index)?,
        proof: work.prove(aggregator_index)?,
    };
    work.credit(aggregator_index, FieldElement::from_u128(params.agg_reward))?;

    let mut bits = ValidatorBits::new();
    let mut witnesses = Vec::with_capacity(votes.len());
    for vote in votes {
        let idx = vote.validator_index;
        witnesses.push(VoteWitness {
            account: work.account(idx)?,
            merkle_proof: work.prove(idx)?,
            signature: vote.signature.clone(),
            claimed_block_hash: vote.block_hash,
        });
        work.credit(idx, FieldElement::from_u128(params.val_reward))?;
        bits.set(idx);
    }

    let rotation_public = rotation.map(|r| RotationPublic {
        seed: r.seed,
        next_seed: r.seed.mul(&r.secret),
    });
    let public = AggregationPublic {
        pre_state_root,
        post_state_root: work.root(),
        block_hash,
        request_id,
        aggregator_index,
        validator_bits: bits,
        rotation: rotation_public,
    };
    let witness = AggregationWitness {
        aggregator,
        votes: witnesses,
        aggregator_secret: rotation.map(|r| r.secret.clone()),
    };
    Ok((public, witness))
}

/// Builds the public inputs and witness for an honest aggregation of exactly
/// `threshold` votes on `block_hash`, processed in the order given.
pub fn build_aggregation_witness(
    params: &CircuitParams,
    tree: &StateTree,
    aggregator_index: u64,
    votes: &[Vote],
    request_id: u64,
    block_hash: FieldElement,
    rotation: Option<&RotationInput>,
) -> Result<(AggregationPublic, AggregationWitness), CircuitError> {
    if votes.len() != params.threshold {
        return Err(CircuitError::WrongVoteCount {
            expected: params.threshold,
            actual: votes.len(),
        });
    }
    if votes
        .iter()
        .any(|v| v.block_hash != block_hash || v.request_id != request_id)
    {
        return Err(CircuitError::MixedVotes);
    }
    if rotation.is_some() != params.rotation {
        return Err(CircuitError::RotationMismatch);
    }
    assemble_aggregation(
        params,
        tree,
        aggregator_index,
        votes,
        request_id,
        block_hash,
        rotation,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{keygen, KeyPair};

    struct Fixture {
        params: CircuitParams,
        tree: StateTree,
        keys: Vec<KeyPair>,
    }

    fn fixture(depth: u32) -> Fixture {
        let params = CircuitParams::new(depth, 50, 10);
        let mut tree = StateTree::new(depth).unwrap();
        let keys: Vec<KeyPair> = (0..tree.capacity())
            .map(|i| keygen(&[i as u8 + 1; 32]))
            .collect();
        for (i, k) in keys.iter().enumerate() {
            tree.set_account(i as u64, Account::new(i as u64, k.public, 100 + i as u128))
                .unwrap();
        }
        Fixture { params, tree, keys }
    }

    fn votes(f: &Fixture, indices: &[u64], request: u64, hash: FieldElement) -> Vec<Vote> {
        indices
            .iter()
            .map(|&i| Vote::new(&f.keys[i as usize], i, request, hash))
            .collect()
    }

    #[test]
    fn honest_instance_accepted() {
        let f = fixture(2);
        let h = FieldElement::from_u64(777);
        let vs = votes(&f, &[0, 1, 3], 4, h);
        let (public, witness) =
            build_aggregation_witness(&f.params, &f.tree, 2, &vs, 4, h, None).unwrap();
        let report = check_aggregation(&f.params, &public, &witness);
        assert_eq!(report.failure_site, None);
        assert!(report.ok);
        assert_eq!(report.constraint_count, cost::aggregation(&f.params));
        assert_eq!(public.validator_bits.to_string(), "11");
    }

    #[test]
    fn bits_for_zero_and_two() {
        // Depth 1: capacity 2, t = 2. Use depth 2 with t overridden to 2.
        let mut f = fixture(2);
        f.params.threshold = 2;
        let h = FieldElement::from_u64(1);
        let vs = votes(&f, &[0, 2], 0, h);
        let (public, witness) =
            build_aggregation_witness(&f.params, &f.tree, 1, &vs, 0, h, None).unwrap();
        assert_eq!(public.validator_bits.to_string(), "5");
        assert!(check_aggregation(&f.params, &public, &witness).ok);
    }

    #[test]
    fn wrong_claimed_hash_fails_at_hash_site() {
        let f = fixture(2);
        let h = FieldElement::from_u64(777);
        let vs = votes(&f, &[0, 1, 3], 4, h);
        let (public, mut witness) =
            build_aggregation_witness(&f.params, &f.tree, 2, &vs, 4, h, None).unwrap();
        witness.votes[1].claimed_block_hash = FieldElement::from_u64(778);
        let r = check_aggregation(&f.params, &public, &witness);
        assert!(!r.ok);
        assert_eq!(r.failure_site, Some(SITE_VOTE_HASH));
        assert_eq!(r.constraint_count, cost::aggregation(&f.params));
    }

    #[test]
    fn duplicate_index_fails() {
        let f = fixture(2);
        let h = FieldElement::from_u64(5);
        let vs = votes(&f, &[0, 1, 1], 9, h);
        let (public, witness) =
            assemble_aggregation(&f.params, &f.tree, 2, &vs, 9, h, None).unwrap();
        let r = check_aggregation(&f.params, &public, &witness);
        assert_eq!(r.failure_site, Some(SITE_DUPLICATE));
    }

    #[test]
    fn wrong_bits_fail() {
        let f = fixture(2);
        let h = FieldElement::from_u64(5);
        let vs = votes(&f, &[0, 1, 2], 9, h);
        let (mut public, witness) =
            build_aggregation_witness(&f.params, &f.tree, 3, &vs, 9, h, None).unwrap();
        public.validator_bits = ValidatorBits::from_indices([0, 1, 3]);
        assert_eq!(
            check_aggregation(&f.params, &public, &witness).failure_site,
            Some(SITE_BITS)
        );
    }

    #[test]
    fn forged_signature_fails() {
        let f = fixture(2);
        let h = FieldElement::from_u64(5);
        let mut vs = votes(&f, &[0, 1, 2], 9, h);
        vs[2] = Vote::new(&f.keys[3], 2, 9, h);
        let (public, witness) =
            build_aggregation_witness(&f.params, &f.tree, 3, &vs, 9, h, None).unwrap();
        assert_eq!(
            check_aggregation(&f.params, &public, &witness).failure_site,
            Some(SITE_VOTE_SIGNATURE)
        );
    }

    #[test]
    fn reward_to_other_aggregator_fails() {
        let f = fixture(2);
        let h = FieldElement::from_u64(5);
        let vs = votes(&f, &[0, 1, 2], 9, h);
        let (mut public, witness) =
            build_aggregation_witness(&f.params, &f.tree, 3, &vs, 9, h, None).unwrap();
        public.aggregator_index = 0;
        assert_eq!(
            check_aggregation(&f.params, &public, &witness).failure_site,
            Some(SITE_AGG_INDEX)
        );
    }

    #[test]
    fn aggregator_may_also_vote() {
        let f = fixture(2);
        let h = FieldElement::from_u64(5);
        let vs = votes(&f, &[0, 1, 2], 9, h);
        let (public, witness) =
            build_aggregation_witness(&f.params, &f.tree, 1, &vs, 9, h, None).unwrap();
        assert!(check_aggregation(&f.params, &public, &witness).ok);
    }

    #[test]
    fn builder_errors() {
        let f = fixture(2);
        let h = FieldElement::from_u64(5);
        let vs = votes(&f, &[0, 1], 9, h);
        assert_eq!(
            build_aggregation_witness(&f.params, &f.tree, 1, &vs, 9, h, None).unwrap_err(),
            CircuitError::WrongVoteCount {
                expected: 3,
                actual: 2
            }
        );
        let mut vs = votes(&f, &[0, 1, 2], 9, h);
        vs[0] = Vote::new(&f.keys[0], 0, 9, FieldElement::from_u64(6));
        assert_eq!(
            build_aggregation_witness(&f.params, &f.tree, 1, &vs, 9, h, None).unwrap_err(),
            CircuitError::MixedVotes
        );
    }

    #[test]
    fn short_witness_is_malformed_with_fixed_count() {
        let f = fixture(2);
        let h = FieldElement::from_u64(5);
        let vs = votes(&f, &[0, 1, 2], 9, h);
        let (public, mut witness) =
            build_aggregation_witness(&f.params, &f.tree, 1, &vs, 9, h, None).unwrap();
        witness.votes.pop();
        let r = check_aggregation(&f.params, &public, &witness);
        assert_eq!(r.failure_site, Some(super::super::gadgets::SITE_SHAPE));
        assert_eq!(r.constraint_count, cost::aggregation(&f.params));
    }

    #[test]
    fn rotation_proves_seed_update() {
        let f = fixture(2);
        let mut params = f.params;
        params.rotation = true;
        let h = FieldElement::from_u64(5);
        let vs = votes(&f, &[0, 1, 2], 9, h);
        let rot = RotationInput {
            seed: CurvePoint::generator(),
            secret: f.keys[3].secret.clone(),
        };
        let (mut public, witness) =
            build_aggregation_witness(&params, &f.tree, 3, &vs, 9, h, Some(&rot)).unwrap();
        let r = check_aggregation(&params, &public, &witness);
        assert!(r.ok, "{r:?}");
        assert_eq!(r.constraint_count, cost::aggregation(&params));
        public.rotation.as_mut().unwrap().next_seed = CurvePoint::generator();
        assert_eq!(
            check_aggregation(&params, &public, &witness).failure_site,
            Some(SITE_ROTATION)
        );

        // Secret of a different member cannot stand in for the aggregator's.
        let wrong = RotationInput {
            seed: rot.seed,
            secret: f.keys[0].secret.clone(),
        };
        let (public, witness) =
            build_aggregation_witness(&params, &f.tree, 3, &vs, 9, h, Some(&wrong)).unwrap();
        assert_eq!(
            check_aggregation(&params, &public, &witness).failure_site,
            Some(SITE_ROTATION)
        );
    }
}
