//! Off-chain oracle nodes. Each node keeps a replica of the contract state
//! synced from the event log, answers block requests as a validator and,
//! on its turn, aggregates votes, proves and submits results and slashes
//! dissenters.

mod mempool;

use std::fmt;

use crate::circuits::{
    build_aggregation_witness, build_slash_witness, CircuitError, ProofBackend, PublicInputs,
    RotationInput, Witness,
};
use crate::contract::{
    ContractConfig, ContractError, ContractState, Event, RequestStatus, Selection, SlashTx,
    Submission,
};
use crate::crypto::{CurvePoint, FieldElement, KeyPair};
use crate::tree::Account;
use crate::vote::Vote;

pub use mempool::Mempool;

pub const DEFAULT_FINALITY: u64 = 6;

/// A block as seen by a source-chain client.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub number: u64,
    pub hash: FieldElement,
    pub parent: FieldElement,
}

/// The source chain could not be queried. Retryable; never a zero vote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("source chain unavailable")]
pub struct ChainUnavailable;

/// Read access to the source blockchain.
pub trait SourceChainView {
    fn tip(&self) -> Result<u64, ChainUnavailable>;
    /// The canonical block at `number`, if the chain is that long.
    fn block(&self, number: u64) -> Result<Option<Block>, ChainUnavailable>;
    fn is_canonical(&self, hash: &FieldElement) -> Result<bool, ChainUnavailable>;
}

/// True iff `block` is on the canonical branch and buried under at least
/// `threshold` later blocks.
pub fn check_finality(
    chain: &dyn SourceChainView,
    block: &Block,
    threshold: u64,
) -> Result<bool, ChainUnavailable> {
    let tip = chain.tip()?;
    Ok(
        tip >= block.number
            && tip - block.number >= threshold
            && chain.is_canonical(&block.hash)?,
    )
}

/// What an honest validator reports for `block_number`: the canonical hash
/// if the block is final, zero if it is absent or not yet final.
pub fn honest_answer(
    chain: &dyn SourceChainView,
    block_number: u64,
    threshold: u64,
) -> Result<FieldElement, ChainUnavailable> {
    match chain.block(block_number)? {
        Some(b) if check_finality(chain, &b, threshold)? => Ok(b.hash),
        _ => Ok(FieldElement::zero()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NodeError {
    #[error(transparent)]
    ChainUnavailable(#[from] ChainUnavailable),
    #[error("node key is not registered in the committee")]
    NotRegistered,
    #[error("node is not the current aggregator")]
    NotAggregator,
    #[error("request {0} is not in the expected state")]
    RequestState(u64),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Why an aggregator refused a vote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VoteRejection {
    NotAggregator,
    UnknownRequest,
    RequestClosed,
    UnknownValidator,
    BadSignature,
    Duplicate,
}

impl VoteRejection {
    pub fn label(self) -> &'static str {
        match self {
            VoteRejection::NotAggregator => "not_aggregator",
            VoteRejection::UnknownRequest => "unknown_request",
            VoteRejection::RequestClosed => "request_closed",
            VoteRejection::UnknownValidator => "unknown_validator",
            VoteRejection::BadSignature => "bad_signature",
            VoteRejection::Duplicate => "duplicate",
        }
    }
}

impl fmt::Display for VoteRejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A committee member's off-chain process.
#[derive(Debug, Clone)]
pub struct OracleNode {
    keys: KeyPair,
    replica: ContractState,
    mempool: Mempool,
    finality: u64,
}

impl OracleNode {
    pub fn new(keys: KeyPair, config: ContractConfig) -> Result<Self, ContractError> {
        Ok(OracleNode {
            keys,
            replica: ContractState::genesis(config)?,
            mempool: Mempool::default(),
            finality: DEFAULT_FINALITY,
        })
    }

    pub fn with_finality(mut self, threshold: u64) -> Self {
        self.finality = threshold;
        self
    }

    pub fn keys(&self) -> &KeyPair {
        &self.keys
    }

    pub fn replica(&self) -> &ContractState {
        &self.replica
    }

    pub fn mempool(&self) -> &Mempool {
        &self.mempool
    }

    pub fn finality(&self) -> u64 {
        self.finality
    }

    /// Next event sequence number this node expects.
    pub fn last_seq(&self) -> u64 {
        self.replica.log().len() as u64
    }

    /// The committee slot holding this node's key, if any.
    pub fn index(&self) -> Option<u64> {
        self.replica
            .tree()
            .occupied()
            .find(|a| a.pubkey == self.keys.public)
            .map(|a| a.index)
    }

    pub fn is_aggregator(&self) -> bool {
        self.index().is_some() && self.replica.current_aggregator().ok() == self.index()
    }

    /// Applies the events this node has not seen yet. Events it already has
    /// are skipped; a jump past the next expected sequence number is a gap.
    /// Returns the number of events applied.
    pub fn sync(&mut self, events: &[Event]) -> Result<usize, ContractError> {
        let mut applied = 0;
        for e in events {
            let next = self.last_seq();
            if e.seq < next {
                continue;
            }
            if e.seq > next {
                return Err(ContractError::CorruptLog(format!(
                    "gap: expected event {next}, got {}",
                    e.seq
                )));
            }
            self.replica.apply(e.clone())?;
            applied += 1;
        }
        Ok(applied)
    }

    /// Network address of the current aggregator, where votes are sent.
    pub fn aggregator_ip(&self) -> Option<&str> {
        let agg = self.replica.current_aggregator().ok()?;
        self.replica.ip_of(agg)
    }

    /// Queries the source chain for the requested block and signs the
    /// honest answer.
    pub fn validator_on_request(
        &self,
        request_id: u64,
        block_number: u64,
        chain: &dyn SourceChainView,
    ) -> Result<Vote, NodeError> {
        let index = self.index().ok_or(NodeError::NotRegistered)?;
        let hash = honest_answer(chain, block_number, self.finality)?;
        Ok(self.sign_vote(index, request_id, hash))
    }

    /// Signs an arbitrary answer (used by adversarial behaviors).
    pub fn sign_vote(&self, index: u64, request_id: u64, hash: FieldElement) -> Vote {
        Vote::new(&self.keys, index, request_id, hash)
    }

    fn registered_key(&self, index: u64) -> Option<CurvePoint> {
        let account = self.replica.tree().account(index).ok()?;
        (!account.is_empty()).then_some(account.pubkey)
    }

    /// Stores a vote if this node is the aggregator, the request is open,
    /// the signer is a committee member with a valid signature and it has
    /// not voted on this request before.
    pub fn aggregator_on_vote(&mut self, vote: Vote) -> Result<(), VoteRejection> {
        if !self.is_aggregator() {
            return Err(VoteRejection::NotAggregator);
        }
        match self.replica.request(vote.request_id) {
            None => return Err(VoteRejection::UnknownRequest),
            Some(r) if r.status != RequestStatus::Pending => {
                return Err(VoteRejection::RequestClosed)
            }
            Some(_) => {}
        }
        let pk = self
            .registered_key(vote.validator_index)
            .ok_or(VoteRejection::UnknownValidator)?;
        if !vote.verify(&pk) {
            return Err(VoteRejection::BadSignature);
        }
        if !self.mempool.insert(vote) {
            return Err(VoteRejection::Duplicate);
        }
        Ok(())
    }

    /// Votes on `request_id` for `hash` that still verify against the
    /// current tree, in ascending validator order.
    pub fn valid_votes(&self, request_id: u64, hash: &FieldElement) -> Vec<Vote> {
        self.mempool
            .votes(request_id)
            .filter(|v| v.block_hash == *hash)
            .filter(|v| {
                self.registered_key(v.validator_index)
                    .is_some_and(|pk| v.verify(&pk))
            })
            .cloned()
            .collect()
    }

    /// Builds a proven submission once some hash has at least `t` votes,
    /// rewarding the `t` lowest-indexed voters for it.
    pub fn try_submit(
        &self,
        request_id: u64,
        backend: &dyn ProofBackend,
    ) -> Result<Option<Submission>, NodeError> {
        let t = self.replica.config().threshold();
        let Some(hash) = self.mempool.majority(request_id, t) else {
            return Ok(None);
        };
        let mut votes = self.valid_votes(request_id, &hash);
        if votes.len() < t {
            return Ok(None);
        }
        votes.truncate(t);
        self.prove_submission(request_id, hash, &votes, backend)
            .map(Some)
    }

    /// Proves an aggregation of exactly `votes` (no tally check).
    pub fn prove_submission(
        &self,
        request_id: u64,
        hash: FieldElement,
        votes: &[Vote],
        backend: &dyn ProofBackend,
    ) -> Result<Submission, NodeError> {
        let index = self.index().ok_or(NodeError::NotRegistered)?;
        if !self.is_aggregator() {
            return Err(NodeError::NotAggregator);
        }
        if self.replica.request(request_id).map(|r| r.status) != Some(RequestStatus::Pending) {
            return Err(NodeError::RequestState(request_id));
        }
        let config = self.replica.config();
        let params = config.circuit_params();
        let rotation = (config.selection == Selection::Randomized).then(|| RotationInput {
            seed: self.replica.seed(),
            secret: self.keys.secret.clone(),
        });
        let (public, witness) = build_aggregation_witness(
            &params,
            self.replica.tree(),
            index,
            votes,
            request_id,
            hash,
            rotation.as_ref(),
        )?;
        let proof = backend.prove(
            &params,
            &PublicInputs::Aggregation(public.clone()),
            &Witness::Aggregation(witness),
        )?;
        Ok(Submission {
            request_id,
            block_hash: hash,
            validator_bits: public.validator_bits,
            post_state_root: public.post_state_root,
            next_seed: public.rotation.map(|r| r.next_seed),
            proof,
        })
    }

    /// Slash transactions for every stored, validly signed vote on an
    /// answered request that disagrees with the answer, chained so each
    /// pre-state root is the previous post-state root, in ascending victim
    /// order. Only the aggregator that answered may slash.
    pub fn build_slashes(
        &self,
        request_id: u64,
        backend: &dyn ProofBackend,
    ) -> Result<Vec<SlashTx>, NodeError> {
        let index = self.index().ok_or(NodeError::NotRegistered)?;
        let request = self
            .replica
            .request(request_id)
            .ok_or(NodeError::RequestState(request_id))?;
        let (Some(answer), Some(by)) = (request.answer_hash, request.answered_by) else {
            return Err(NodeError::RequestState(request_id));
        };
        if by != index {
            return Err(NodeError::NotAggregator);
        }
        let params = self.replica.config().circuit_params();
        let mut tree = self.replica.tree().clone();
        let mut out = Vec::new();
        for vote in self.mempool.votes(request_id) {
            let victim = vote.validator_index;
            if vote.block_hash == answer
                || victim == index
                || self.replica.is_slashed(request_id, victim)
            {
                continue;
            }
            let Some(pk) = self.registered_key(victim) else {
                continue;
            };
            if !vote.verify(&pk) {
                continue;
            }
            let (public, witness) =
                build_slash_witness(&params, &tree, index, vote, request_id, answer)?;
            let proof = backend.prove(
                &params,
                &PublicInputs::Slash(public.clone()),
                &Witness::Slash(witness),
            )?;
            let mut zeroed: Account = tree.account(victim).map_err(CircuitError::from)?;
            let amount = zeroed.balance;
            zeroed.balance = FieldElement::zero();
            tree.set_account(victim, zeroed)
                .map_err(CircuitError::from)?;
            tree.credit(index, amount).map_err(CircuitError::from)?;
            debug_assert_eq!(tree.root(), public.post_state_root);
            out.push(SlashTx {
                request_id,
                agg_index: index,
                val_index: victim,
                post_state_root: public.post_state_root,
                proof,
            });
        }
        Ok(out)
    }

    /// Drops the stored votes of a request that is settled.
    pub fn forget(&mut self, request_id: u64) {
        self.mempool.remove(request_id);
    }
}
