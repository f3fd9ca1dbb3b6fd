use std::collections::BTreeSet;

use crate::crypto::{mimc_hash_n, FieldElement};
use crate::nodes::{Block, ChainUnavailable, SourceChainView};

/// A side branch to grow: `length` blocks on top of canonical block `attach`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForkSpec {
    pub attach: u64,
    pub length: u64,
}

/// Longest-chain source blockchain with explicit fork injection.
#[derive(Debug, Clone)]
pub struct MockChain {
    canonical: Vec<Block>,
    orphans: Vec<Block>,
    hashes: BTreeSet<FieldElement>,
    nonce: u64,
    reorgs: u64,
    available: bool,
}

impl MockChain {
    /// Genesis block 0 plus `blocks` more.
    pub fn new(blocks: u64) -> Self {
        let mut chain = MockChain {
            canonical: Vec::new(),
            orphans: Vec::new(),
            hashes: BTreeSet::new(),
            nonce: 0,
            reorgs: 0,
            available: true,
        };
        let genesis = chain.mint(0, FieldElement::zero());
        chain.canonical.push(genesis);
        chain.advance(blocks, None);
        chain
    }

    /// `hash = MiMC(number, parentHash, nonce)`; the nonce keeps sibling
    /// blocks at the same height distinct.
    fn mint(&mut self, number: u64, parent: FieldElement) -> Block {
        loop {
            let hash = mimc_hash_n([
                FieldElement::from_u64(number),
                parent,
                FieldElement::from_u64(self.nonce),
            ]);
            self.nonce += 1;
            if self.hashes.insert(hash) {
                return Block {
                    number,
                    hash,
                    parent,
                };
            }
        }
    }

    pub fn tip_number(&self) -> u64 {
        self.canonical.last().expect("genesis exists").number
    }

    pub fn tip_block(&self) -> Block {
        *self.canonical.last().expect("genesis exists")
    }

    pub fn canonical_block(&self, number: u64) -> Option<Block> {
        self.canonical.get(number as usize).copied()
    }

    pub fn orphans(&self) -> &[Block] {
        &self.orphans
    }

    pub fn reorgs(&self) -> u64 {
        self.reorgs
    }

    pub fn set_available(&mut self, up: bool) {
        self.available = up;
    }

    /// Appends `k` canonical blocks, then grows the optional fork. If the
    /// fork ends up longer than the canonical branch it becomes canonical
    /// and the blocks it displaces are orphaned. Returns whether a reorg
    /// happened.
    pub fn advance(&mut self, k: u64, fork: Option<ForkSpec>) -> bool {
        for _ in 0..k {
            let tip = self.tip_block();
            let b = self.mint(tip.number + 1, tip.hash);
            self.canonical.push(b);
        }
        let Some(spec) = fork else { return false };
        if spec.length == 0 || spec.attach > self.tip_number() {
            return false;
        }
        let mut branch = Vec::with_capacity(spec.length as usize);
        let mut parent = self.canonical[spec.attach as usize];
        for _ in 0..spec.length {
            let b = self.mint(parent.number + 1, parent.hash);
            branch.push(b);
            parent = b;
        }
        if parent.number > self.tip_number() {
            let displaced = self.canonical.split_off(spec.attach as usize + 1);
            self.orphans.extend(displaced);
            self.canonical.extend(branch);
            self.reorgs += 1;
            true
        } else {
            self.orphans.extend(branch);
            false
        }
    }
}

impl SourceChainView for MockChain {
    fn tip(&self) -> Result<u64, ChainUnavailable> {
        self.available
            .then(|| self.tip_number())
            .ok_or(ChainUnavailable)
    }

    fn block(&self, number: u64) -> Result<Option<Block>, ChainUnavailable> {
        self.available
            .then(|| self.canonical_block(number))
            .ok_or(ChainUnavailable)
    }

    fn is_canonical(&self, hash: &FieldElement) -> Result<bool, ChainUnavailable> {
        if !self.available {
            return Err(ChainUnavailable);
        }
        Ok(self.canonical.iter().rev().any(|b| b.hash == *hash))
    }
}
