//! Sparse Merkle tree of committee accounts.
//!
//! Leaves are `MiMC(index, pk.x, pk.y, balance)`; internal nodes are
//! `MiMC(left, right)`. Every unoccupied position holds the same constant
//! empty leaf, `MiMC(0, 0, 0, 0)`, so an all-empty tree of depth `D` has the
//! `D`-fold self-hash of that constant as its root.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use once_cell::sync::Lazy;

use crate::crypto::{mimc_hash_n, CurvePoint, FieldElement};

pub const DEFAULT_DEPTH: u32 = 8;
pub const MAX_DEPTH: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("index {index} out of range for capacity {capacity}")]
    IndexOutOfRange { index: u64, capacity: u64 },
    #[error("account index {actual} does not match leaf position {expected}")]
    IndexMismatch { expected: u64, actual: u64 },
    #[error("invalid proof: {0}")]
    InvalidProof(&'static str),
    #[error("tree depth must be in 1..={MAX_DEPTH}, got {0}")]
    InvalidDepth(u32),
    #[error("snapshot line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A committee member record; the leaf preimage.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Account {
    pub index: u64,
    pub pubkey: CurvePoint,
    /// Stake units; the contract keeps this below 2^128.
    pub balance: FieldElement,
}

impl Account {
    pub fn new(index: u64, pubkey: CurvePoint, balance: u128) -> Self {
        Account {
            index,
            pubkey,
            balance: FieldElement::from_u128(balance),
        }
    }

    pub fn empty(index: u64) -> Self {
        Account {
            index,
            pubkey: CurvePoint::zero(),
            balance: FieldElement::zero(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pubkey == CurvePoint::zero() && self.balance.is_zero()
    }

    pub fn balance_units(&self) -> Option<u128> {
        self.balance.to_u128()
    }

    pub fn leaf_hash(&self) -> FieldElement {
        leaf_hash(self)
    }
}

/// `MiMC(index, pk.x, pk.y, balance)`.
pub fn leaf_hash(account: &Account) -> FieldElement {
    mimc_hash_n([
        FieldElement::from_u64(account.index),
        account.pubkey.x,
        account.pubkey.y,
        account.balance,
    ])
}

static EMPTY_LEAF: Lazy<FieldElement> = Lazy::new(|| leaf_hash(&Account::empty(0)));

/// The leaf value of every unoccupied position.
pub fn empty_leaf() -> FieldElement {
    *EMPTY_LEAF
}

/// `MiMC(left, right)`.
pub fn node_hash(left: FieldElement, right: FieldElement) -> FieldElement {
    mimc_hash_n([left, right])
}

/// Authentication path from a leaf to the root. `directions[k]` is true when
/// the node at level `k` is a right child.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MerkleProof {
    pub leaf: FieldElement,
    pub path: Vec<FieldElement>,
    pub directions: Vec<bool>,
}

impl MerkleProof {
    pub fn depth(&self) -> usize {
        self.path.len()
    }

    /// Leaf position encoded by the direction bits.
    pub fn index(&self) -> u64 {
        self.directions
            .iter()
            .enumerate()
            .fold(0u64, |acc, (k, &bit)| acc | (u64::from(bit) << k))
    }

    /// Same path, different leaf: the in-place root update used by the circuits.
    pub fn with_leaf(&self, leaf: FieldElement) -> MerkleProof {
        MerkleProof {
            leaf,
            path: self.path.clone(),
            directions: self.directions.clone(),
        }
    }

    fn check_shape(&self) -> Result<(), TreeError> {
        if self.path.len() != self.directions.len() {
            return Err(TreeError::InvalidProof("path and direction lengths differ"));
        }
        if self.path.is_empty() || self.path.len() > MAX_DEPTH as usize {
            return Err(TreeError::InvalidProof("path length out of range"));
        }
        Ok(())
    }
}

/// Folds the leaf up its path.
pub fn root_from_path(proof: &MerkleProof) -> Result<FieldElement, TreeError> {
    proof.check_shape()?;
    Ok(proof
        .path
        .iter()
        .zip(&proof.directions)
        .fold(proof.leaf, |h, (sibling, &right)| {
            if right {
                node_hash(*sibling, h)
            } else {
                node_hash(h, *sibling)
            }
        }))
}

pub fn verify_proof(root: &FieldElement, proof: &MerkleProof) -> Result<bool, TreeError> {
    Ok(root_from_path(proof)? == *root)
}

/// Fully materialized tree with cached internal nodes; `levels[0]` are the
/// leaves and `levels[depth]` holds the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateTree {
    depth: u32,
    levels: Vec<Vec<FieldElement>>,
    accounts: BTreeMap<u64, Account>,
}

impl Default for StateTree {
    fn default() -> Self {
        StateTree::new(DEFAULT_DEPTH).expect("default depth is valid")
    }
}

impl StateTree {
    pub fn new(depth: u32) -> Result<Self, TreeError> {
        if depth == 0 || depth > MAX_DEPTH {
            return Err(TreeError::InvalidDepth(depth));
        }
        let mut levels = Vec::with_capacity(depth as usize + 1);
        let mut node = empty_leaf();
        for level in 0..=depth {
            levels.push(vec![node; 1usize << (depth - level)]);
            node = node_hash(node, node);
        }
        Ok(StateTree {
            depth,
            levels,
            accounts: BTreeMap::new(),
        })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn capacity(&self) -> u64 {
        1u64 << self.depth
    }

    pub fn root(&self) -> FieldElement {
        self.levels[self.depth as usize][0]
    }

    fn check_index(&self, index: u64) -> Result<(), TreeError> {
        if index >= self.capacity() {
            return Err(TreeError::IndexOutOfRange {
                index,
                capacity: self.capacity(),
            });
        }
        Ok(())
    }

    pub fn leaf(&self, index: u64) -> Result<FieldElement, TreeError> {
        self.check_index(index)?;
        Ok(self.levels[0][index as usize])
    }

    /// The account at `index`, or the empty account.
    pub fn account(&self, index: u64) -> Result<Account, TreeError> {
        self.check_index(index)?;
        Ok(self
            .accounts
            .get(&index)
            .cloned()
            .unwrap_or_else(|| Account::empty(index)))
    }

    pub fn is_occupied(&self, index: u64) -> bool {
        self.accounts.contains_key(&index)
    }

    /// Non-empty accounts in index order.
    pub fn occupied(&self) -> impl Iterator<Item = &Account> {
        self.accounts.values()
    }

    pub fn prove(&self, index: u64) -> Result<MerkleProof, TreeError> {
        self.check_index(index)?;
        let mut path = Vec::with_capacity(self.depth as usize);
        let mut directions = Vec::with_capacity(self.depth as usize);
        let mut pos = index as usize;
        for level in 0..self.depth as usize {
            path.push(self.levels[level][pos ^ 1]);
            directions.push(pos & 1 == 1);
            pos >>= 1;
        }
        Ok(MerkleProof {
            leaf: self.levels[0][index as usize],
            path,
            directions,
        })
    }

    /// Replaces the leaf at `index` and returns the new root.
    pub fn set_account(&mut self, index: u64, account: Account) -> Result<FieldElement, TreeError> {
        self.check_index(index)?;
        if account.index != index {
            return Err(TreeError::IndexMismatch {
                expected: index,
                actual: account.index,
            });
        }
        let leaf = if account.is_empty() {
            self.accounts.remove(&index);
            empty_leaf()
        } else {
            let leaf = leaf_hash(&account);
            self.accounts.insert(index, account);
            leaf
        };
        let mut pos = index as usize;
        self.levels[0][pos] = leaf;
        for level in 1..=self.depth as usize {
            pos >>= 1;
            let left = self.levels[level - 1][2 * pos];
            let right = self.levels[level - 1][2 * pos + 1];
            self.levels[level][pos] = node_hash(left, right);
        }
        Ok(self.root())
    }

    /// Adds `amount` to the balance at `index` (field addition).
    pub fn credit(&mut self, index: u64, amount: FieldElement) -> Result<FieldElement, TreeError> {
        let mut account = self.account(index)?;
        account.balance += amount;
        self.set_account(index, account)
    }

    /// Line-oriented snapshot of the occupied leaves:
    ///
    /// ```text
    /// depth <D>
    /// <index> <pubkey.x> <pubkey.y> <balance>
    /// ```
    pub fn export_snapshot(&self) -> String {
        let mut out = format!("depth {}\n", self.depth);
        for a in self.accounts.values() {
            let _ = writeln!(
                out,
                "{} {} {} {}",
                a.index, a.pubkey.x, a.pubkey.y, a.balance
            );
        }
        out
    }

    pub fn import_snapshot(text: &str) -> Result<Self, TreeError> {
        let mut tree: Option<StateTree> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| TreeError::Parse { line: i + 1, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match (&mut tree, fields.as_slice()) {
                (None, ["depth", d]) => {
                    let depth = d.parse().map_err(|_| err(format!("bad depth {d:?}")))?;
                    tree = Some(StateTree::new(depth)?);
                }
                (None, _) => return Err(err("expected `depth <D>` header".into())),
                (Some(t), [idx, x, y, bal]) => {
                    let index: u64 = idx.parse().map_err(|_| err(format!("bad index {idx:?}")))?;
                    let parse = |s: &str| s.parse::<FieldElement>().map_err(|e| err(e.to_string()));
                    let account = Account {
                        index,
                        pubkey: CurvePoint {
                            x: parse(x)?,
                            y: parse(y)?,
                        },
                        balance: parse(bal)?,
                    };
                    if t.is_occupied(index) {
                        return Err(err(format!("duplicate index {index}")));
                    }
                    t.set_account(index, account)?;
                }
                (Some(_), _) => return Err(err("expected 4 fields".into())),
            }
        }
        tree.ok_or(TreeError::Parse {
            line: 0,
            msg: "empty snapshot".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{keygen, mimc_hash};
    use proptest::prelude::*;

    fn fe(s: &str) -> FieldElement {
        s.parse().unwrap()
    }

    fn member(index: u64, balance: u128) -> Account {
        let mut seed = [7u8; 32];
        seed[..8].copy_from_slice(&index.to_be_bytes());
        Account::new(index, keygen(&seed).public, balance)
    }

    // Independent whole-tree recomputation from the leaf vector.
    fn naive_root(depth: u32, accounts: &BTreeMap<u64, Account>) -> FieldElement {
        let mut level: Vec<FieldElement> = (0..1u64 << depth)
            .map(|i| accounts.get(&i).map(leaf_hash).unwrap_or_else(empty_leaf))
            .collect();
        while level.len() > 1 {
            level = level
                .chunks(2)
                .map(|p| mimc_hash(&[p[0], p[1]]).unwrap())
                .collect();
        }
        level[0]
    }

    #[test]
    fn empty_leaf_is_zero_account_hash() {
        assert_eq!(
            leaf_hash(&Account::empty(0)),
            fe("17683159034002903499172969622391991084470788025616159899169873672834613880211")
        );
        assert_eq!(empty_leaf(), leaf_hash(&Account::empty(0)));
    }

    #[test]
    fn empty_roots_match_reference() {
        // From the independent Python script.
        assert_eq!(
            StateTree::new(1).unwrap().root(),
            fe("14514221614244334219696507853257631246042705714868257404828335542866192894279")
        );
        assert_eq!(
            StateTree::new(2).unwrap().root(),
            fe("6047852222572441528649712200513989775709084315467385523966453509796816405473")
        );
    }

    #[test]
    fn balance_changes_leaf() {
        let a = member(1, 100);
        let mut b = a.clone();
        b.balance = FieldElement::from_u64(101);
        assert_ne!(leaf_hash(&a), leaf_hash(&b));
        assert_eq!(leaf_hash(&a), leaf_hash(&a));
    }

    #[test]
    fn set_and_restore() {
        let mut t = StateTree::new(3).unwrap();
        let empty_root = t.root();
        let r1 = t.set_account(0, member(0, 100)).unwrap();
        assert_ne!(r1, empty_root);
        assert_eq!(t.leaf(0).unwrap(), leaf_hash(&member(0, 100)));
        assert_eq!(t.set_account(0, Account::empty(0)).unwrap(), empty_root);
        assert_eq!(t.set_account(5, Account::empty(5)).unwrap(), empty_root);
    }

    #[test]
    fn proof_directions_are_index_bits() {
        let t = StateTree::new(2).unwrap();
        let p = t.prove(3).unwrap();
        assert_eq!(p.directions, vec![true, true]);
        assert_eq!(p.index(), 3);
        assert_eq!(t.prove(2).unwrap().directions, vec![false, true]);
    }

    #[test]
    fn single_fold() {
        let leaf = FieldElement::from_u64(11);
        let sib = FieldElement::from_u64(12);
        let p = MerkleProof {
            leaf,
            path: vec![sib],
            directions: vec![false],
        };
        assert_eq!(
            root_from_path(&p).unwrap(),
            mimc_hash(&[leaf, sib]).unwrap()
        );
    }

    #[test]
    fn errors() {
        let mut t = StateTree::new(2).unwrap();
        assert!(matches!(t.prove(4), Err(TreeError::IndexOutOfRange { .. })));
        assert!(matches!(
            t.set_account(1, member(2, 5)),
            Err(TreeError::IndexMismatch {
                expected: 1,
                actual: 2
            })
        ));
        let mut p = t.prove(0).unwrap();
        p.directions.pop();
        assert!(matches!(
            verify_proof(&t.root(), &p),
            Err(TreeError::InvalidProof(_))
        ));
        assert_eq!(StateTree::new(0), Err(TreeError::InvalidDepth(0)));
    }

    #[test]
    fn stale_proof_fails() {
        let mut t = StateTree::new(3).unwrap();
        t.set_account(1, member(1, 10)).unwrap();
        let p = t.prove(1).unwrap();
        t.set_account(6, member(6, 10)).unwrap();
        assert!(!verify_proof(&t.root(), &p).unwrap());
        assert!(verify_proof(&t.root(), &t.prove(1).unwrap()).unwrap());
    }

    #[test]
    fn flipped_direction_fails() {
        let mut t = StateTree::new(3).unwrap();
        for i in 0..8 {
            t.set_account(i, member(i, 10 + u128::from(i))).unwrap();
        }
        let mut p = t.prove(5).unwrap();
        p.directions[1] = !p.directions[1];
        assert!(!verify_proof(&t.root(), &p).unwrap());
        assert!(!verify_proof(&FieldElement::one(), &t.prove(5).unwrap()).unwrap());
    }

    // Every single-field perturbation of every valid proof fails, for all
    // positions of small trees.
    #[test]
    fn brute_force_soundness_small_depths() {
        for depth in 1..=3u32 {
            let mut t = StateTree::new(depth).unwrap();
            for i in (0..t.capacity()).step_by(2) {
                t.set_account(i, member(i, 50 + u128::from(i))).unwrap();
            }
            let root = t.root();
            for i in 0..t.capacity() {
                let p = t.prove(i).unwrap();
                assert!(verify_proof(&root, &p).unwrap());
                let mut bad = p.clone();
                bad.leaf += FieldElement::one();
                assert!(!verify_proof(&root, &bad).unwrap());
                for k in 0..depth as usize {
                    let mut bad = p.clone();
                    bad.path[k] += FieldElement::one();
                    assert!(!verify_proof(&root, &bad).unwrap());
                    let mut bad = p.clone();
                    bad.directions[k] = !bad.directions[k];
                    assert!(!verify_proof(&root, &bad).unwrap());
                }
            }
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let mut t = StateTree::new(3).unwrap();
        t.set_account(2, member(2, 100)).unwrap();
        t.set_account(7, member(7, 250)).unwrap();
        let text = t.export_snapshot();
        let back = StateTree::import_snapshot(&text).unwrap();
        assert_eq!(back, t);
        assert!(StateTree::import_snapshot("2 1 2 3").is_err());
        assert!(StateTree::import_snapshot("depth 2\n9 1 2 3").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        // Substituting the new leaf into the old path reproduces the root of
        // the updated tree, and both agree with a from-scratch rebuild.
        #[test]
        fn path_update_equivalence(
            depth in 2u32..=8,
            fill in proptest::collection::vec((any::<u8>(), 1u128..1000), 1..12),
            target in any::<u8>(),
            new_balance in 0u128..10_000,
        ) {
            let mut t = StateTree::new(depth).unwrap();
            let mut shadow = BTreeMap::new();
            let cap = t.capacity();
            for (i, bal) in fill {
                let idx = u64::from(i) % cap;
                let a = member(idx, bal);
                t.set_account(idx, a.clone()).unwrap();
                shadow.insert(idx, a);
            }
            let idx = u64::from(target) % cap;
            let proof = t.prove(idx).unwrap();
            let updated = member(idx, new_balance.max(1));
            let via_path = root_from_path(&proof.with_leaf(leaf_hash(&updated))).unwrap();
            let via_set = t.set_account(idx, updated.clone()).unwrap();
            shadow.insert(idx, updated);
            prop_assert_eq!(via_path, via_set);
            prop_assert_eq!(via_set, naive_root(depth, &shadow));
        }
    }

    #[test]
    fn rebuild_is_deterministic() {
        let build = || {
            let mut t = StateTree::new(4).unwrap();
            for i in [3u64, 9, 1, 14] {
                t.set_account(i, member(i, u128::from(i) * 7 + 1)).unwrap();
            }
            t.root()
        };
        assert_eq!(build(), build());
    }
}
