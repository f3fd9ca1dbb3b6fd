use std::collections::BTreeMap;

use crate::crypto::FieldElement;
use crate::vote::Vote;

/// Votes held by an aggregator: the first vote per (request, validator)
/// and a per-request tally of block hashes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Mempool {
    votes: BTreeMap<u64, BTreeMap<u64, Vote>>,
    tally: BTreeMap<u64, BTreeMap<FieldElement, usize>>,
}

impl Mempool {
    /// False if this validator already has a vote on this request.
    pub fn insert(&mut self, vote: Vote) -> bool {
        let slot = self.votes.entry(vote.request_id).or_default();
        if slot.contains_key(&vote.validator_index) {
            return false;
        }
        *self
            .tally
            .entry(vote.request_id)
            .or_default()
            .entry(vote.block_hash)
            .or_default() += 1;
        slot.insert(vote.validator_index, vote);
        true
    }

    /// Stored votes on a request, ascending by validator index.
    pub fn votes(&self, request_id: u64) -> impl Iterator<Item = &Vote> {
        self.votes
            .get(&request_id)
            .into_iter()
            .flat_map(|m| m.values())
    }

    pub fn vote_count(&self, request_id: u64) -> usize {
        self.votes.get(&request_id).map_or(0, |m| m.len())
    }

    pub fn tally(&self, request_id: u64, hash: &FieldElement) -> usize {
        self.tally
            .get(&request_id)
            .and_then(|t| t.get(hash))
            .copied()
            .unwrap_or(0)
    }

    /// A hash with at least `threshold` votes. With one vote per validator
    /// and a strict-majority threshold at most one hash qualifies; ties
    /// beyond that go to the smallest hash.
    pub fn majority(&self, request_id: u64, threshold: usize) -> Option<FieldElement> {
        self.tally
            .get(&request_id)?
            .iter()
            .find(|(_, &n)| n >= threshold)
            .map(|(h, _)| *h)
    }

    pub fn remove(&mut self, request_id: u64) {
        self.votes.remove(&request_id);
        self.tally.remove(&request_id);
    }
}
