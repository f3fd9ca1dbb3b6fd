//! Self-check suites shared by `selftest` and the acceptance tests: a
//! brute-force soundness sweep of the aggregation circuit, a shadow-tree
//! oracle for circuit state transitions, balance conservation over random
//! contract histories, and the committee membership rule.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuits::{
    assemble_aggregation, build_aggregation_witness, build_slash_witness, check_aggregation,
    check_slash, encode_witness, CircuitParams, ProofBackend, PublicInputs, RotationInput,
    TransparentBackend, Witness,
};
use crate::contract::{
    Address, Contract, ContractConfig, ContractError, Selection, SlashTx, Submission,
};
use crate::crypto::{keygen, mimc_hash_n, CurvePoint, FieldElement, KeyPair};
use crate::tree::{Account, StateTree};
use crate::vote::Vote;

fn seeded_key(rng: &mut impl RngCore) -> KeyPair {
    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    keygen(&seed)
}

/// Whole-tree root recomputed from scratch: every leaf hashed, every level
/// folded, nothing cached.
pub fn shadow_root(depth: u32, accounts: &BTreeMap<u64, (CurvePoint, u128)>) -> FieldElement {
    let zero = FieldElement::zero();
    let mut level: Vec<FieldElement> = (0..1u64 << depth)
        .map(|i| match accounts.get(&i) {
            Some((pk, bal)) => mimc_hash_n([
                FieldElement::from_u64(i),
                pk.x,
                pk.y,
                FieldElement::from_u128(*bal),
            ]),
            None => mimc_hash_n([zero, zero, zero, zero]),
        })
        .collect();
    while level.len() > 1 {
        level = level.chunks(2).map(|p| mimc_hash_n([p[0], p[1]])).collect();
    }
    level[0]
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BruteForceReport {
    pub assignments: u64,
    pub packagings: u64,
    pub accepted: u64,
    pub false_accepts: u64,
    pub false_rejects: u64,
}

impl BruteForceReport {
    pub fn ok(&self) -> bool {
        self.false_accepts == 0 && self.false_rejects == 0
    }
}

/// What one validator put on the wire in the brute-force sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cast {
    /// Valid signature on the public hash.
    Agree,
    /// Valid signature on a different hash.
    Disagree,
    /// Claims the public hash under someone else's signature.
    Forged,
}

/// D = 2, n = 4, t = 3. Every validator independently agrees, disagrees or
/// forges (3⁴ assignments); for each assignment every size-t multiset of
/// the cast votes is packaged and checked against the agreed hash. The
/// circuit must accept exactly the packagings of t distinct agreeing votes.
pub fn brute_force_aggregation() -> BruteForceReport {
    const DEPTH: u32 = 2;
    let params = CircuitParams::new(DEPTH, 50, 10);
    let t = params.threshold;
    let n = params.capacity();
    let keys: Vec<KeyPair> = (0..n).map(|i| keygen(&[0x40 + i as u8; 32])).collect();
    let mut tree = StateTree::new(DEPTH).expect("depth");
    for (i, k) in keys.iter().enumerate() {
        tree.set_account(i as u64, Account::new(i as u64, k.public, 500 + i as u128))
            .expect("index");
    }
    let request = 7;
    let good = FieldElement::from_u64(0xabc);
    let other = FieldElement::from_u64(0xdef);

    let mut multisets = Vec::new();
    for a in 0..n {
        for b in a..n {
            for c in b..n {
                multisets.push([a, b, c]);
            }
        }
    }
    debug_assert_eq!(multisets[0].len(), t);

    let mut report = BruteForceReport::default();
    for code in 0..3u32.pow(n as u32) {
        report.assignments += 1;
        let casts: Vec<Cast> = (0..n)
            .map(|i| match (code / 3u32.pow(i as u32)) % 3 {
                0 => Cast::Agree,
                1 => Cast::Disagree,
                _ => Cast::Forged,
            })
            .collect();
        let votes: Vec<Vote> = (0..n)
            .map(|i| match casts[i as usize] {
                Cast::Agree => Vote::new(&keys[i as usize], i, request, good),
                Cast::Disagree => Vote::new(&keys[i as usize], i, request, other),
                Cast::Forged => {
                    let mut v = Vote::new(&keys[((i + 1) % n) as usize], i, request, good);
                    v.validator_index = i;
                    v
                }
            })
            .collect();
        for set in &multisets {
            report.packagings += 1;
            let chosen: Vec<Vote> = set.iter().map(|&i| votes[i as usize].clone()).collect();
            let (public, witness) =
                assemble_aggregation(&params, &tree, 0, &chosen, request, good, None)
                    .expect("assembly never validates");
            let accepted = check_aggregation(&params, &public, &witness).ok;
            let distinct = set[0] != set[1] && set[1] != set[2];
            let expected = distinct && set.iter().all(|&i| casts[i as usize] == Cast::Agree);
            report.accepted += u64::from(accepted);
            match (accepted, expected) {
                (true, false) => report.false_accepts += 1,
                (false, true) => report.false_rejects += 1,
                _ => {}
            }
        }
    }
    report
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OracleReport {
    pub aggregations: u64,
    pub slashes: u64,
    pub mismatches: Vec<String>,
}

impl OracleReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

struct RandomTree {
    depth: u32,
    tree: StateTree,
    keys: BTreeMap<u64, KeyPair>,
    shadow: BTreeMap<u64, (CurvePoint, u128)>,
}

fn random_tree(depth: u32, min_members: u64, pool: &[KeyPair], rng: &mut ChaCha8Rng) -> RandomTree {
    let capacity = 1u64 << depth;
    let members = rng.gen_range(min_members..=capacity);
    let mut slots: Vec<u64> = (0..capacity).collect();
    slots.shuffle(rng);
    let mut tree = StateTree::new(depth).expect("depth");
    let mut keys = BTreeMap::new();
    let mut shadow = BTreeMap::new();
    for &slot in &slots[..members as usize] {
        let key = pool[slot as usize].clone();
        let balance = rng.gen_range(100..u128::from(u64::MAX));
        tree.set_account(slot, Account::new(slot, key.public, balance))
            .expect("slot");
        shadow.insert(slot, (key.public, balance));
        keys.insert(slot, key);
    }
    RandomTree {
        depth,
        tree,
        keys,
        shadow,
    }
}

/// Random accepted aggregation and slash instances at depths 2, 4 and 8.
/// Each must be accepted by its circuit, and its post-state root must equal
/// a from-scratch recomputation over the expected new balances.
pub fn state_transition_oracle(aggregations: u64, slashes: u64, seed: u64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<KeyPair> = (0..256).map(|_| seeded_key(&mut rng)).collect();
    let depths = [2u32, 4, 8];
    let mut report = OracleReport::default();

    for case in 0..aggregations {
        let depth = depths[case as usize % depths.len()];
        let rotation = rng.gen_bool(0.25);
        let mut params = CircuitParams::new(depth, rng.gen_range(1..1000), rng.gen_range(1..1000));
        params.rotation = rotation;
        let t = params.threshold;
        let mut rt = random_tree(depth, t as u64, &pool, &mut rng);
        let occupied: Vec<u64> = rt.shadow.keys().copied().collect();
        let agg = *occupied.choose(&mut rng).expect("non-empty");
        let mut voters: Vec<u64> = occupied.choose_multiple(&mut rng, t).copied().collect();
        voters.shuffle(&mut rng);
        let request = rng.gen::<u32>() as u64;
        let hash = FieldElement::from_u128(rng.gen());
        let votes: Vec<Vote> = voters
            .iter()
            .map(|&i| Vote::new(&rt.keys[&i], i, request, hash))
            .collect();
        let rot = rotation.then(|| RotationInput {
            seed: CurvePoint::generator().mul(&crate::crypto::Scalar::reduce(
                &num_bigint::BigUint::from(rng.gen_range(1u64..1 << 40)),
            )),
            secret: rt.keys[&agg].secret.clone(),
        });
        let (public, witness) = match build_aggregation_witness(
            &params,
            &rt.tree,
            agg,
            &votes,
            request,
            hash,
            rot.as_ref(),
        ) {
            Ok(x) => x,
            Err(e) => {
                report
                    .mismatches
                    .push(format!("aggregation {case}: witness build failed: {e}"));
                continue;
            }
        };
        let verdict = check_aggregation(&params, &public, &witness);
        rt.shadow.get_mut(&agg).expect("member").1 += params.agg_reward;
        for v in &voters {
            rt.shadow.get_mut(v).expect("member").1 += params.val_reward;
        }
        let expected = shadow_root(rt.depth, &rt.shadow);
        if !verdict.ok {
            report.mismatches.push(format!(
                "aggregation {case} (D={depth}) rejected at {:?}",
                verdict.failure_site
            ));
        } else if public.post_state_root != expected {
            report.mismatches.push(format!(
                "aggregation {case} (D={depth}) root differs from shadow"
            ));
        }
        report.aggregations += 1;
    }

    for case in 0..slashes {
        let depth = depths[case as usize % depths.len()];
        let params = CircuitParams::new(depth, 50, 10);
        let mut rt = random_tree(depth, 2, &pool, &mut rng);
        let occupied: Vec<u64> = rt.shadow.keys().copied().collect();
        let pair: Vec<u64> = occupied.choose_multiple(&mut rng, 2).copied().collect();
        let (agg, victim) = (pair[0], pair[1]);
        let request = rng.gen::<u32>() as u64;
        let answer = FieldElement::from_u128(rng.gen());
        let dissent = if rng.gen_bool(0.3) {
            FieldElement::zero()
        } else {
            FieldElement::from_u128(rng.gen())
        };
        let vote = Vote::new(&rt.keys[&victim], victim, request, dissent);
        let (public, witness) =
            match build_slash_witness(&params, &rt.tree, agg, &vote, request, answer) {
                Ok(x) => x,
                Err(e) => {
                    report
                        .mismatches
                        .push(format!("slash {case}: witness build failed: {e}"));
                    continue;
                }
            };
        let verdict = check_slash(&params, &public, &witness);
        let taken = std::mem::take(&mut rt.shadow.get_mut(&victim).expect("member").1);
        rt.shadow.get_mut(&agg).expect("member").1 += taken;
        let expected = shadow_root(rt.depth, &rt.shadow);
        if !verdict.ok {
            report.mismatches.push(format!(
                "slash {case} (D={depth}) rejected at {:?}",
                verdict.failure_site
            ));
        } else if public.post_state_root != expected {
            report
                .mismatches
                .push(format!("slash {case} (D={depth}) root differs from shadow"));
        }
        report.slashes += 1;
    }
    report
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConservationReport {
    pub scenarios: u64,
    pub transactions: u64,
    pub slashes: u64,
    pub violations: Vec<String>,
}

impl ConservationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Drives a depth-2 contract through a random history of registrations,
/// replacements, exits, withdrawals, answered requests, slashes and
/// timeouts, checking the balance identity after every transaction.
struct Driver {
    contract: Contract,
    rng: ChaCha8Rng,
    keys: BTreeMap<u64, (KeyPair, Address)>,
    next_owner: u64,
    backend: TransparentBackend,
}

impl Driver {
    fn sum(&self) -> u128 {
        self.contract.state().total_balance()
    }

    fn identity(&self) -> Result<(), String> {
        let l = self.contract.state().ledger();
        let expected = l.deposited + l.rewards_credited - l.withdrawn - l.displaced_returned;
        if self.sum() != expected {
            return Err(format!(
                "balances {} but ledger says {expected}",
                self.sum()
            ));
        }
        self.contract.state().audit()
    }

    fn account(&self, index: u64) -> (Account, crate::tree::MerkleProof) {
        let tree = self.contract.state().tree();
        (
            tree.account(index).expect("index"),
            tree.prove(index).expect("index"),
        )
    }

    fn fresh_member(&mut self) -> (KeyPair, Address) {
        self.next_owner += 1;
        (seeded_key(&mut self.rng), Address(self.next_owner))
    }

    fn occupied(&self) -> Vec<u64> {
        self.contract
            .state()
            .tree()
            .occupied()
            .map(|a| a.index)
            .collect()
    }

    fn submission(&self, request: u64, voters: &[u64], hash: FieldElement) -> Submission {
        let c = &self.contract;
        let params = c.config().circuit_params();
        let agg = c.get_aggregator().expect("committee");
        let votes: Vec<Vote> = voters
            .iter()
            .map(|&i| Vote::new(&self.keys[&i].0, i, request, hash))
            .collect();
        let rotation = (c.config().selection == Selection::Randomized).then(|| RotationInput {
            seed: c.state().seed(),
            secret: self.keys[&agg].0.secret.clone(),
        });
        let (public, witness) = build_aggregation_witness(
            &params,
            c.state().tree(),
            agg,
            &votes,
            request,
            hash,
            rotation.as_ref(),
        )
        .expect("honest witness");
        let proof = self
            .backend
            .prove(
                &params,
                &PublicInputs::Aggregation(public.clone()),
                &Witness::Aggregation(witness),
            )
            .expect("prove");
        Submission {
            request_id: request,
            block_hash: hash,
            validator_bits: public.validator_bits,
            post_state_root: public.post_state_root,
            next_seed: public.rotation.map(|r| r.next_seed),
            proof,
        }
    }

    fn slash_tx(&self, agg: u64, vote: &Vote, answer: FieldElement) -> SlashTx {
        let params = self.contract.config().circuit_params();
        let (public, witness) = build_slash_witness(
            &params,
            self.contract.state().tree(),
            agg,
            vote,
            vote.request_id,
            answer,
        )
        .expect("slash witness");
        let proof = self
            .backend
            .prove(
                &params,
                &PublicInputs::Slash(public.clone()),
                &Witness::Slash(witness),
            )
            .expect("prove");
        SlashTx {
            request_id: vote.request_id,
            agg_index: agg,
            val_index: vote.validator_index,
            post_state_root: public.post_state_root,
            proof,
        }
    }

    /// One random step. Returns the number of transactions that landed.
    fn step(&mut self, report: &mut ConservationReport) -> Result<u64, String> {
        let capacity = self.contract.config().capacity();
        let t = self.contract.config().threshold();
        let occupied = self.occupied();
        let now = self.contract.now() + self.rng.gen_range(1..30);
        self.contract.set_time(now).map_err(|e| e.to_string())?;
        let fail = |e: ContractError| e.to_string();

        match self.rng.gen_range(0..10) {
            0 | 1 if (occupied.len() as u64) < capacity => {
                let (key, owner) = self.fresh_member();
                let stake = self.rng.gen_range(100..2000);
                let idx = self
                    .contract
                    .register(owner, key.public, "host", stake)
                    .map_err(fail)?;
                self.keys.insert(idx, (key, owner));
                Ok(1)
            }
            0..=2 if !occupied.is_empty() => {
                let target = *occupied.choose(&mut self.rng).expect("non-empty");
                let (account, proof) = self.account(target);
                let bal = account.balance_units().expect("small");
                let stake = bal.max(self.contract.config().min_stake) + self.rng.gen_range(0..50);
                let (key, owner) = self.fresh_member();
                match self
                    .contract
                    .replace(owner, key.public, "host", stake, target, &account, &proof)
                {
                    Ok(idx) => {
                        self.keys.insert(idx, (key, owner));
                        Ok(1)
                    }
                    Err(ContractError::StakeTooLow) if stake <= bal => Ok(0),
                    Err(e) => Err(e.to_string()),
                }
            }
            3 if !occupied.is_empty() => {
                let idx = *occupied.choose(&mut self.rng).expect("non-empty");
                let (account, proof) = self.account(idx);
                let owner = self.keys[&idx].1;
                match self.contract.exit(owner, &account, &proof) {
                    Ok(_) => Ok(1),
                    Err(ContractError::AlreadyExiting) => {
                        let later = self.contract.now() + self.contract.config().exit_delay;
                        self.contract.set_time(later).map_err(fail)?;
                        self.contract
                            .withdraw(owner, &account, &proof)
                            .map_err(fail)?;
                        self.keys.remove(&idx);
                        Ok(1)
                    }
                    Err(e) => Err(e.to_string()),
                }
            }
            4..=7 if occupied.len() >= t => {
                let fee = self.contract.config().request_fee;
                let request = self
                    .contract
                    .request_block(Address(1), 5, fee)
                    .map_err(fail)?;
                self.identity()?;
                let mut voters: Vec<u64> = occupied
                    .choose_multiple(&mut self.rng, t)
                    .copied()
                    .collect();
                voters.sort_unstable();
                let hash = FieldElement::from_u64(self.rng.gen_range(0..4));
                let agg = self.contract.get_aggregator().map_err(fail)?;
                let sub = self.submission(request, &voters, hash);
                self.contract
                    .submit_block(self.keys[&agg].1, &sub)
                    .map_err(fail)?;
                let mut landed = 2;
                let dissenters: Vec<u64> = occupied
                    .iter()
                    .copied()
                    .filter(|i| !voters.contains(i) && *i != agg)
                    .collect();
                for victim in dissenters {
                    if !self.rng.gen_bool(0.6) {
                        continue;
                    }
                    self.identity()?;
                    let vote = Vote::new(
                        &self.keys[&victim].0,
                        victim,
                        request,
                        hash + FieldElement::one(),
                    );
                    let tx = self.slash_tx(agg, &vote, hash);
                    let before = self.sum();
                    self.contract.slash(self.keys[&agg].1, &tx).map_err(fail)?;
                    if self.sum() != before {
                        return Err(format!(
                            "slash changed total balance {before} -> {}",
                            self.sum()
                        ));
                    }
                    report.slashes += 1;
                    landed += 1;
                }
                Ok(landed)
            }
            8 if !occupied.is_empty() => {
                let fee = self.contract.config().request_fee;
                self.contract
                    .request_block(Address(2), 9, fee)
                    .map_err(fail)?;
                self.identity()?;
                let deadline = self.contract.state().deadline().expect("pending");
                self.contract
                    .set_time(deadline.max(self.contract.now()))
                    .map_err(fail)?;
                self.contract.timeout_aggregator().map_err(fail)?;
                // Leave nothing pending so later submissions start clean.
                let pending: Vec<u64> = self.contract.state().pending().map(|r| r.id).collect();
                let mut landed = 2;
                for request in pending {
                    let occupied = self.occupied();
                    if occupied.len() < t {
                        break;
                    }
                    self.identity()?;
                    let voters: Vec<u64> = occupied[..t].to_vec();
                    let agg = self.contract.get_aggregator().map_err(fail)?;
                    let sub = self.submission(request, &voters, FieldElement::zero());
                    self.contract
                        .submit_block(self.keys[&agg].1, &sub)
                        .map_err(fail)?;
                    landed += 1;
                }
                Ok(landed)
            }
            _ => Ok(0),
        }
    }
}

/// `scenarios` random histories of `steps` steps each.
pub fn conservation_suite(scenarios: u64, steps: u64, seed: u64) -> ConservationReport {
    let mut report = ConservationReport::default();
    for s in 0..scenarios {
        let mut config = ContractConfig::new(2);
        if s % 4 == 3 {
            config.selection = Selection::Randomized;
        }
        let mut driver = Driver {
            contract: Contract::new(config).expect("valid config"),
            rng: ChaCha8Rng::seed_from_u64(seed.wrapping_add(s)),
            keys: BTreeMap::new(),
            next_owner: 100,
            backend: TransparentBackend,
        };
        report.scenarios += 1;
        for step in 0..steps {
            // Requests only settle when a full committee can answer, so keep
            // anything unanswered from piling up across steps.
            let outcome = driver
                .step(&mut report)
                .and_then(|n| driver.identity().map(|_| n));
            match outcome {
                Ok(n) => report.transactions += n,
                Err(e) => {
                    report
                        .violations
                        .push(format!("scenario {s} step {step}: {e}"));
                    break;
                }
            }
        }
        let replayed =
            crate::contract::ContractState::replay(&driver.contract.state().export_log());
        match replayed {
            Ok(st) if st.state_root() == driver.contract.state().state_root() => {}
            Ok(_) => report
                .violations
                .push(format!("scenario {s}: replay root differs")),
            Err(e) => report
                .violations
                .push(format!("scenario {s}: replay failed: {e}")),
        }
    }
    report
}

/// Feeds join attempts with the given stakes into an n = 4 committee. A
/// newcomer takes a free slot if there is one and otherwise tries to
/// displace the lowest-balance member. Each outcome must follow the
/// strictly-greater rule, and afterwards the committee's balances must be
/// the four largest stakes offered so far.
pub fn membership_sequence(stakes: &[u128], seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Contract::new(ContractConfig::new(2)).map_err(|e| e.to_string())?;
    let capacity = c.config().capacity() as usize;
    let mut offered: Vec<u128> = Vec::new();
    for (k, &stake) in stakes.iter().enumerate() {
        let key = seeded_key(&mut rng);
        let owner = Address(k as u64 + 1);
        let tree = c.state().tree().clone();
        let result = if c.state().lowest_empty().is_some() {
            c.register(owner, key.public, "host", stake)
        } else {
            let (victim, bal) = tree
                .occupied()
                .map(|a| (a.index, a.balance_units().expect("small")))
                .min_by_key(|&(i, b)| (b, i))
                .expect("full committee");
            let account = tree.account(victim).expect("index");
            let proof = tree.prove(victim).expect("index");
            let r = c.replace(owner, key.public, "host", stake, victim, &account, &proof);
            let min = c.config().min_stake;
            match (&r, stake > bal) {
                (Err(ContractError::InsufficientStake { .. }), _) if stake < min => {}
                (Ok(_), true) | (Err(ContractError::StakeTooLow), false) if stake >= min => {}
                _ => return Err(format!("stake {stake} against minimum {bal}: {r:?}")),
            }
            r
        };
        if stake >= c.config().min_stake && result.is_err() && c.state().lowest_empty().is_some() {
            return Err(format!("registration of {stake} failed: {result:?}"));
        }
        if stake >= c.config().min_stake {
            offered.push(stake);
        }
        let mut expected = offered.clone();
        expected.sort_unstable_by(|a, b| b.cmp(a));
        expected.truncate(capacity);
        let mut actual: Vec<u128> = c
            .state()
            .tree()
            .occupied()
            .map(|a| a.balance_units().expect("small"))
            .collect();
        actual.sort_unstable_by(|a, b| b.cmp(a));
        if actual != expected {
            return Err(format!(
                "after stake {stake}: committee {actual:?}, expected {expected:?}"
            ));
        }
    }
    Ok(())
}

/// One line of the scaling report: a committee of `size` members in the
/// smallest tree that holds it, one honest aggregation and one slash.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScalingRow {
    pub size: u64,
    pub depth: u32,
    pub threshold: usize,
    pub agg_constraints: u64,
    pub slash_constraints: u64,
    pub agg_witness_bytes: usize,
    pub slash_witness_bytes: usize,
}

pub const SCALING_HEADER: &str =
    "size,depth,threshold,agg_constraints,slash_constraints,agg_witness_bytes,slash_witness_bytes";

impl ScalingRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.size,
            self.depth,
            self.threshold,
            self.agg_constraints,
            self.slash_constraints,
            self.agg_witness_bytes,
            self.slash_witness_bytes
        )
    }
}

/// Builds and checks the two instances for a committee of `size` members
/// (2 to 2^16) in slots `0..size` of a depth-⌈log2 size⌉ tree. Any such
/// committee holds at least t members.
pub fn scaling_row(size: u64) -> Result<ScalingRow, String> {
    if !(2..=1 << crate::tree::MAX_DEPTH).contains(&size) {
        return Err(format!(
            "size {size} outside 2..={}",
            1u64 << crate::tree::MAX_DEPTH
        ));
    }
    let depth = size.next_power_of_two().trailing_zeros();
    let params = CircuitParams::new(depth, 50, 10);
    let t = params.threshold;
    let mut tree = StateTree::new(depth).map_err(|e| e.to_string())?;
    let keys: Vec<KeyPair> = (0..size)
        .map(|i| {
            let mut seed = [0x5a; 32];
            seed[..8].copy_from_slice(&i.to_be_bytes());
            keygen(&seed)
        })
        .collect();
    for (i, k) in keys.iter().enumerate() {
        tree.set_account(i as u64, Account::new(i as u64, k.public, 1000))
            .map_err(|e| e.to_string())?;
    }
    let hash = FieldElement::from_u64(0xb10c);
    let votes: Vec<Vote> = (0..t as u64)
        .map(|i| Vote::new(&keys[i as usize], i, 1, hash))
        .collect();
    let (public, witness) = build_aggregation_witness(&params, &tree, 0, &votes, 1, hash, None)
        .map_err(|e| e.to_string())?;
    let agg = check_aggregation(&params, &public, &witness);
    if !agg.ok {
        return Err(format!(
            "size {size}: aggregation rejected at {:?}",
            agg.failure_site
        ));
    }
    let agg_bytes = encode_witness(&Witness::Aggregation(witness)).len();

    let dissent = Vote::new(&keys[size as usize - 1], size - 1, 1, FieldElement::zero());
    let (public, witness) =
        build_slash_witness(&params, &tree, 0, &dissent, 1, hash).map_err(|e| e.to_string())?;
    let slash = check_slash(&params, &public, &witness);
    if !slash.ok {
        return Err(format!(
            "size {size}: slash rejected at {:?}",
            slash.failure_site
        ));
    }
    let slash_bytes = encode_witness(&Witness::Slash(witness)).len();
    Ok(ScalingRow {
        size,
        depth,
        threshold: t,
        agg_constraints: agg.constraint_count,
        slash_constraints: slash.constraint_count,
        agg_witness_bytes: agg_bytes,
        slash_witness_bytes: slash_bytes,
    })
}

pub fn scaling_csv(rows: &[ScalingRow]) -> String {
    let mut out = String::from(SCALING_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shadow_root_matches_tree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pool: Vec<KeyPair> = (0..16).map(|_| seeded_key(&mut rng)).collect();
        let rt = random_tree(4, 3, &pool, &mut rng);
        assert_eq!(shadow_root(4, &rt.shadow), rt.tree.root());
        assert_eq!(
            shadow_root(3, &BTreeMap::new()),
            StateTree::new(3).unwrap().root()
        );
    }

    #[test]
    fn small_oracle_run() {
        let r = state_transition_oracle(6, 6, 3);
        assert!(r.ok(), "{:?}", r.mismatches);
        assert_eq!((r.aggregations, r.slashes), (6, 6));
    }

    #[test]
    fn small_conservation_run() {
        let r = conservation_suite(4, 40, 9);
        assert!(r.ok(), "{:?}", r.violations);
        assert!(r.transactions > 40);
    }

    #[test]
    fn scaling_small_sizes() {
        let rows: Vec<ScalingRow> = [4, 8]
            .into_iter()
            .map(|s| scaling_row(s).unwrap())
            .collect();
        assert_eq!(rows[0].threshold, 3);
        assert_eq!(rows[1].depth, 3);
        assert!(rows[1].agg_constraints > rows[0].agg_constraints);
        let six = scaling_row(6).unwrap();
        assert_eq!((six.depth, six.threshold), (3, 5));
        assert_eq!(six.slash_constraints, rows[1].slash_constraints);
        assert_eq!(six.agg_constraints, rows[1].agg_constraints);
        assert!(scaling_row(1).is_err());
        assert!(scaling_csv(&rows).starts_with(SCALING_HEADER));
    }

    #[test]
    fn membership_examples() {
        membership_sequence(&[100, 200, 300, 400, 150, 150, 500, 99, 1000], 1).unwrap();
        membership_sequence(&[500; 6], 2).unwrap();
    }
}
