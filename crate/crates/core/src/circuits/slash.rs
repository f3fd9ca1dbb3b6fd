use crate::crypto::FieldElement;
use crate::tree::StateTree;
use crate::vote::Vote;

use super::aggregation::{AccountWitness, VoteWitness};
use super::gadgets::{malformed, Tracer};
use super::{cost, CircuitError, CircuitParams, ConstraintReport};

/// Public inputs of the slashing circuit. `block_hash` is the answer the
/// contract stored for the request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlashPublic {
    pub pre_state_root: FieldElement,
    pub post_state_root: FieldElement,
    pub block_hash: FieldElement,
    pub request_id: u64,
    pub agg_index: u64,
    pub val_index: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlashWitness {
    pub aggregator: AccountWitness,
    pub victim: VoteWitness,
}

pub(crate) const SITE_DISTINCT: &str = "distinct_indices";
pub(crate) const SITE_VICTIM_INDEX: &str = "victim_index";
pub(crate) const SITE_AGG_INDEX: &str = "aggregator_index";
pub(crate) const SITE_VICTIM_MEMBERSHIP: &str = "victim_membership";
pub(crate) const SITE_VICTIM_SIGNATURE: &str = "victim_signature";
pub(crate) const SITE_AGG_MEMBERSHIP: &str = "aggregator_membership";
pub(crate) const SITE_HASH_DIFFERS: &str = "block_hash_differs";
pub(crate) const SITE_POST_ROOT: &str = "post_state_root";

/// Runs the slashing circuit: the victim's signed vote must disagree with the
/// answer, its whole balance moves to the aggregator, and the two leaf
/// rewrites must produce the declared post-state root.
pub fn check_slash(
    params: &CircuitParams,
    public: &SlashPublic,
    witness: &SlashWitness,
) -> ConstraintReport {
    let depth = params.depth as usize;
    let agg = &witness.aggregator;
    let victim = &witness.victim;
    if agg.proof.path.len() != depth
        || agg.proof.directions.len() != depth
        || victim.merkle_proof.path.len() != depth
        || victim.merkle_proof.directions.len() != depth
    {
        return malformed(cost::slash(params));
    }
    let mut tr = Tracer::new();

    tr.assert(SITE_DISTINCT, public.agg_index != public.val_index);
    tr.assert(SITE_VICTIM_INDEX, victim.account.index == public.val_index);
    tr.assert(SITE_AGG_INDEX, agg.account.index == public.agg_index);

    tr.membership(
        SITE_VICTIM_MEMBERSHIP,
        public.pre_state_root,
        &victim.account,
        &victim.merkle_proof,
    );
    // The victim signed its own answer, so the message is built from it.
    let msg = tr.hash([
        FieldElement::from_u64(victim.account.index),
        FieldElement::from_u64(public.request_id),
        victim.claimed_block_hash,
    ]);
    tr.signature(
        SITE_VICTIM_SIGNATURE,
        &victim.account.pubkey,
        &msg,
        &victim.signature,
    );

    let deducted = victim.account.balance;
    let mut zeroed = victim.account.clone();
    zeroed.balance = FieldElement::zero();
    let intermediate = tr.path_update(&zeroed, &victim.merkle_proof);

    tr.membership(SITE_AGG_MEMBERSHIP, intermediate, &agg.account, &agg.proof);
    let mut credited = agg.account.clone();
    credited.balance += deducted;
    let root = tr.path_update(&credited, &agg.proof);

    tr.assert(
        SITE_HASH_DIFFERS,
        public.block_hash != victim.claimed_block_hash,
    );
    tr.assert(SITE_POST_ROOT, root == public.post_state_root);
    tr.finish()
}

/// Builds a slash of `victim_vote` against `tree`, crediting `agg_index`.
pub fn build_slash_witness(
    _params: &CircuitParams,
    tree: &StateTree,
    agg_index: u64,
    victim_vote: &Vote,
    request_id: u64,
    majority_hash: FieldElement,
) -> Result<(SlashPublic, SlashWitness), CircuitError> {
    let val_index = victim_vote.validator_index;
    if victim_vote.block_hash == majority_hash {
        return Err(CircuitError::NotSlashable("vote agrees with the answer"));
    }
    if victim_vote.request_id != request_id {
        return Err(CircuitError::NotSlashable(
            "vote belongs to another request",
        ));
    }
    if val_index == agg_index {
        return Err(CircuitError::NotSlashable("aggregator cannot slash itself"));
    }

    let mut work = tree.clone();
    let pre_state_root = work.root();
    let victim_account = work.account(val_index)?;
    let victim = VoteWitness {
        account: victim_account.clone(),
        merkle_proof: work.prove(val_index)?,
        signature: victim_vote.signature.clone(),
        claimed_block_hash: victim_vote.block_hash,
    };
    let mut zeroed = victim_account.clone();
    zeroed.balance = FieldElement::zero();
    work.set_account(val_index, zeroed)?;

    let aggregator = AccountWitness {
        account: work.account(agg_index)?,
        proof: work.prove(agg_index)?,
    };
    work.credit(agg_index, victim_account.balance)?;

    let public = SlashPublic {
        pre_state_root,
        post_state_root: work.root(),
        block_hash: majority_hash,
        request_id,
        agg_index,
        val_index,
    };
    Ok((public, SlashWitness { aggregator, victim }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{keygen, KeyPair};
    use crate::tree::Account;

    fn setup() -> (CircuitParams, StateTree, Vec<KeyPair>) {
        let params = CircuitParams::new(2, 50, 10);
        let mut tree = StateTree::new(2).unwrap();
        let keys: Vec<KeyPair> = (0..4).map(|i| keygen(&[40 + i as u8; 32])).collect();
        for (i, k) in keys.iter().enumerate() {
            tree.set_account(
                i as u64,
                Account::new(i as u64, k.public, 100 * (i as u128 + 1)),
            )
            .unwrap();
        }
        (params, tree, keys)
    }

    #[test]
    fn dissenter_is_slashed() {
        let (params, tree, keys) = setup();
        let answer = FieldElement::from_u64(1000);
        let vote = Vote::new(&keys[2], 2, 7, FieldElement::from_u64(999));
        let (public, witness) = build_slash_witness(&params, &tree, 0, &vote, 7, answer).unwrap();
        let r = check_slash(&params, &public, &witness);
        assert!(r.ok, "{r:?}");
        assert_eq!(r.constraint_count, cost::slash(&params));

        let mut after = tree.clone();
        after
            .set_account(2, Account::new(2, keys[2].public, 0))
            .unwrap();
        after
            .set_account(0, Account::new(0, keys[0].public, 100 + 300))
            .unwrap();
        assert_eq!(public.post_state_root, after.root());
    }

    #[test]
    fn majority_voter_not_slashable() {
        let (params, tree, keys) = setup();
        let answer = FieldElement::from_u64(1000);
        let vote = Vote::new(&keys[2], 2, 7, answer);
        assert!(matches!(
            build_slash_witness(&params, &tree, 0, &vote, 7, answer),
            Err(CircuitError::NotSlashable(_))
        ));
        // A hand-built witness for the same vote fails at the inequality.
        let other = FieldElement::from_u64(5);
        let (mut public, witness) = build_slash_witness(
            &params,
            &tree,
            0,
            &Vote::new(&keys[2], 2, 7, answer),
            7,
            other,
        )
        .unwrap();
        public.block_hash = answer;
        assert_eq!(
            check_slash(&params, &public, &witness).failure_site,
            Some(SITE_HASH_DIFFERS)
        );
    }

    #[test]
    fn forged_vote_rejected() {
        let (params, tree, keys) = setup();
        let forged = Vote::new(&keys[3], 2, 7, FieldElement::from_u64(1));
        let (public, witness) =
            build_slash_witness(&params, &tree, 0, &forged, 7, FieldElement::from_u64(2)).unwrap();
        assert_eq!(
            check_slash(&params, &public, &witness).failure_site,
            Some(SITE_VICTIM_SIGNATURE)
        );
    }

    #[test]
    fn public_indices_are_bound() {
        let (params, tree, keys) = setup();
        let vote = Vote::new(&keys[2], 2, 7, FieldElement::from_u64(1));
        let (mut public, witness) =
            build_slash_witness(&params, &tree, 0, &vote, 7, FieldElement::from_u64(2)).unwrap();
        public.agg_index = 1;
        assert_eq!(
            check_slash(&params, &public, &witness).failure_site,
            Some(SITE_AGG_INDEX)
        );
        public.agg_index = 0;
        public.val_index = 3;
        assert_eq!(
            check_slash(&params, &public, &witness).failure_site,
            Some(SITE_VICTIM_INDEX)
        );
    }

    #[test]
    fn zero_balance_victim() {
        let (params, mut tree, keys) = setup();
        tree.set_account(1, Account::new(1, keys[1].public, 0))
            .unwrap();
        let vote = Vote::new(&keys[1], 1, 3, FieldElement::zero());
        let (public, witness) =
            build_slash_witness(&params, &tree, 3, &vote, 3, FieldElement::from_u64(8)).unwrap();
        assert!(check_slash(&params, &public, &witness).ok);
        // Neither leaf changes value, so the root is unchanged.
        assert_eq!(public.post_state_root, public.pre_state_root);
    }

    #[test]
    fn self_slash_refused() {
        let (params, tree, keys) = setup();
        let vote = Vote::new(&keys[0], 0, 3, FieldElement::zero());
        assert!(build_slash_witness(&params, &tree, 0, &vote, 3, FieldElement::one()).is_err());
    }
}
