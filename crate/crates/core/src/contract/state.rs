use std::collections::{BTreeMap, BTreeSet};

use crate::circuits::ValidatorBits;
use crate::crypto::{mimc_hash_n, CurvePoint, FieldElement};
use crate::tree::{Account, StateTree};

use super::{Address, ContractConfig, ContractError, Event, EventKind, EventLog, Selection};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestStatus {
    Pending,
    Answered,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub id: u64,
    pub client: Address,
    pub block_number: u64,
    pub fee: u128,
    pub requested_at: u64,
    pub status: RequestStatus,
    pub answer_hash: Option<FieldElement>,
    pub validator_bits: Option<ValidatorBits>,
    pub answered_by: Option<u64>,
    pub answered_at: Option<u64>,
}

/// Running totals for the conservation audit.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ledger {
    pub deposited: u128,
    pub withdrawn: u128,
    pub displaced_returned: u128,
    pub rewards_credited: u128,
    pub fees_received: u128,
    pub slashed: u128,
}

/// Everything the contract knows. The committee tree is mirrored so the
/// emulation can hand out proofs; `state_root` is what the real contract
/// would store, and the mirror must agree with it after every event.
#[derive(Debug, Clone)]
pub struct ContractState {
    config: ContractConfig,
    state_root: FieldElement,
    tree: StateTree,
    owner_of: BTreeMap<u64, Address>,
    ip_of: BTreeMap<u64, String>,
    exit_time_of: BTreeMap<u64, u64>,
    requests: BTreeMap<u64, Request>,
    next_request_id: u64,
    cursor: u64,
    seed: CurvePoint,
    turn_started: u64,
    escrow: u128,
    slashed: BTreeSet<(u64, u64)>,
    ledger: Ledger,
    l1_balances: BTreeMap<Address, u128>,
    timeouts: u64,
    now: u64,
    log: Vec<Event>,
}

fn corrupt(seq: u64, msg: impl std::fmt::Display) -> ContractError {
    ContractError::CorruptLog(format!("event {seq}: {msg}"))
}

impl ContractState {
    pub fn genesis(config: ContractConfig) -> Result<Self, ContractError> {
        config.validate()?;
        let tree = StateTree::new(config.depth)?;
        Ok(ContractState {
            state_root: tree.root(),
            tree,
            config,
            owner_of: BTreeMap::new(),
            ip_of: BTreeMap::new(),
            exit_time_of: BTreeMap::new(),
            requests: BTreeMap::new(),
            next_request_id: 0,
            cursor: 0,
            seed: CurvePoint::generator(),
            turn_started: 0,
            escrow: 0,
            slashed: BTreeSet::new(),
            ledger: Ledger::default(),
            l1_balances: BTreeMap::new(),
            timeouts: 0,
            now: 0,
            log: Vec::new(),
        })
    }

    /// Replays `log` from genesis. Sequence gaps, reordered times and
    /// events that contradict the state they apply to are `CorruptLog`.
    pub fn replay(log: &EventLog) -> Result<Self, ContractError> {
        let mut state = ContractState::genesis(log.config.clone())?;
        for e in &log.events {
            state.apply(e.clone())?;
        }
        Ok(state)
    }

    pub fn export_log(&self) -> EventLog {
        EventLog {
            config: self.config.clone(),
            events: self.log.clone(),
        }
    }

    pub fn config(&self) -> &ContractConfig {
        &self.config
    }
    pub fn state_root(&self) -> FieldElement {
        self.state_root
    }
    pub fn tree(&self) -> &StateTree {
        &self.tree
    }
    pub fn owner_of(&self, index: u64) -> Option<Address> {
        self.owner_of.get(&index).copied()
    }
    pub fn ip_of(&self, index: u64) -> Option<&str> {
        self.ip_of.get(&index).map(String::as_str)
    }
    pub fn exit_time_of(&self, index: u64) -> Option<u64> {
        self.exit_time_of.get(&index).copied()
    }
    pub fn request(&self, id: u64) -> Option<&Request> {
        self.requests.get(&id)
    }
    pub fn requests(&self) -> impl Iterator<Item = &Request> {
        self.requests.values()
    }
    pub fn pending(&self) -> impl Iterator<Item = &Request> {
        self.requests
            .values()
            .filter(|r| r.status == RequestStatus::Pending)
    }
    pub fn next_request_id(&self) -> u64 {
        self.next_request_id
    }
    pub fn cursor(&self) -> u64 {
        self.cursor
    }
    pub fn seed(&self) -> CurvePoint {
        self.seed
    }
    pub fn escrow(&self) -> u128 {
        self.escrow
    }
    pub fn is_slashed(&self, request_id: u64, index: u64) -> bool {
        self.slashed.contains(&(request_id, index))
    }
    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }
    pub fn l1_balance(&self, who: Address) -> u128 {
        self.l1_balances.get(&who).copied().unwrap_or(0)
    }
    pub fn timeouts(&self) -> u64 {
        self.timeouts
    }
    pub fn now(&self) -> u64 {
        self.now
    }
    pub fn log(&self) -> &[Event] {
        &self.log
    }

    pub fn set_time(&mut self, now: u64) -> Result<(), ContractError> {
        if now < self.now {
            return Err(ContractError::ClockSkew);
        }
        self.now = now;
        Ok(())
    }

    pub fn lowest_empty(&self) -> Option<u64> {
        (0..self.tree.capacity()).find(|&i| !self.tree.is_occupied(i))
    }

    /// First occupied index at or after `start`, wrapping around.
    fn next_occupied(&self, start: u64) -> Result<u64, ContractError> {
        let n = self.tree.capacity();
        (0..n)
            .map(|k| (start + k) % n)
            .find(|&i| self.tree.is_occupied(i))
            .ok_or(ContractError::NoCommittee)
    }

    /// The member responsible for pending requests right now.
    pub fn current_aggregator(&self) -> Result<u64, ContractError> {
        let start = match self.config.selection {
            Selection::RoundRobin => self.cursor,
            Selection::Randomized => {
                let h = mimc_hash_n([self.seed.x, self.seed.y]).to_biguint();
                (h % self.tree.capacity())
                    .try_into()
                    .expect("below capacity")
            }
        };
        self.next_occupied(start)
    }

    /// Time after which the current aggregator may be skipped, if any
    /// request is pending.
    pub fn deadline(&self) -> Option<u64> {
        let oldest = self.pending().map(|r| r.requested_at).min()?;
        Some(oldest.max(self.turn_started) + self.config.agg_timeout)
    }

    /// Sum of all committee balances in stake units.
    pub fn total_balance(&self) -> u128 {
        self.tree
            .occupied()
            .map(|a| a.balance_units().expect("balances stay below 2^128"))
            .sum()
    }

    /// Root consistency, conservation and escrow identities.
    pub fn audit(&self) -> Result<(), String> {
        if self.state_root != self.tree.root() {
            return Err("stored state root differs from the committee tree".into());
        }
        let l = &self.ledger;
        let expected = (l.deposited + l.rewards_credited)
            .checked_sub(l.withdrawn + l.displaced_returned)
            .ok_or("more paid out than ever deposited")?;
        let total = self.total_balance();
        if total != expected {
            return Err(format!(
                "balances sum to {total}, ledger expects {expected}"
            ));
        }
        if l.fees_received.checked_sub(l.rewards_credited) != Some(self.escrow) {
            return Err(format!(
                "escrow {} != fees {} - rewards {}",
                self.escrow, l.fees_received, l.rewards_credited
            ));
        }
        Ok(())
    }

    fn advance_turn(&mut self, from: u64, next_seed: Option<CurvePoint>) {
        match self.config.selection {
            Selection::RoundRobin => self.cursor = (from + 1) % self.tree.capacity(),
            Selection::Randomized => {
                self.seed = next_seed.unwrap_or_else(|| self.seed.add(&CurvePoint::generator()));
            }
        }
        self.turn_started = self.now;
    }

    /// Applies one event. All checks run before any mutation, so a rejected
    /// event leaves the state untouched.
    pub fn apply(&mut self, event: Event) -> Result<(), ContractError> {
        let seq = event.seq;
        if seq != self.log.len() as u64 {
            return Err(corrupt(
                seq,
                format!("expected sequence number {}", self.log.len()),
            ));
        }
        if event.time < self.now {
            return Err(corrupt(seq, "time moves backwards"));
        }
        let unit = |v: u128| FieldElement::from_u128(v);
        match &event.kind {
            EventKind::Registered {
                index,
                owner,
                pubkey,
                ip,
                stake,
            } => {
                if *index >= self.tree.capacity() || self.tree.is_occupied(*index) {
                    return Err(corrupt(seq, format!("slot {index} not free")));
                }
                self.now = event.time;
                self.tree
                    .set_account(*index, Account::new(*index, *pubkey, *stake))?;
                self.owner_of.insert(*index, *owner);
                self.ip_of.insert(*index, ip.clone());
                self.ledger.deposited += stake;
            }
            EventKind::Replaced {
                index,
                owner,
                pubkey,
                ip,
                stake,
                displaced_owner,
                displaced_balance,
            } => {
                let current = self.tree.account(*index)?;
                if current.is_empty()
                    || current.balance_units() != Some(*displaced_balance)
                    || self.owner_of(*index) != Some(*displaced_owner)
                    || stake <= displaced_balance
                {
                    return Err(corrupt(
                        seq,
                        format!("replacement of slot {index} inconsistent"),
                    ));
                }
                self.now = event.time;
                self.tree
                    .set_account(*index, Account::new(*index, *pubkey, *stake))?;
                self.owner_of.insert(*index, *owner);
                self.ip_of.insert(*index, ip.clone());
                self.exit_time_of.remove(index);
                *self.l1_balances.entry(*displaced_owner).or_default() += displaced_balance;
                self.ledger.deposited += stake;
                self.ledger.displaced_returned += displaced_balance;
            }
            EventKind::Exited { index, exit_time } => {
                if !self.tree.is_occupied(*index)
                    || self.exit_time_of.contains_key(index)
                    || *exit_time != event.time + self.config.exit_delay
                {
                    return Err(corrupt(seq, format!("slot {index} cannot exit")));
                }
                self.now = event.time;
                self.exit_time_of.insert(*index, *exit_time);
            }
            EventKind::Withdrawn {
                index,
                owner,
                amount,
            } => {
                let current = self.tree.account(*index)?;
                let due = self.exit_time_of(*index);
                if current.is_empty()
                    || current.balance_units() != Some(*amount)
                    || self.owner_of(*index) != Some(*owner)
                    || due.map_or(true, |t| event.time < t)
                {
                    return Err(corrupt(
                        seq,
                        format!("withdrawal from slot {index} inconsistent"),
                    ));
                }
                self.now = event.time;
                self.tree.set_account(*index, Account::empty(*index))?;
                self.owner_of.remove(index);
                self.ip_of.remove(index);
                self.exit_time_of.remove(index);
                *self.l1_balances.entry(*owner).or_default() += amount;
                self.ledger.withdrawn += amount;
            }
            EventKind::BlockRequested {
                request_id,
                client,
                block_number,
                fee,
            } => {
                if *request_id != self.next_request_id {
                    return Err(corrupt(seq, "request ids must be dense"));
                }
                self.now = event.time;
                self.requests.insert(
                    *request_id,
                    Request {
                        id: *request_id,
                        client: *client,
                        block_number: *block_number,
                        fee: *fee,
                        requested_at: event.time,
                        status: RequestStatus::Pending,
                        answer_hash: None,
                        validator_bits: None,
                        answered_by: None,
                        answered_at: None,
                    },
                );
                self.next_request_id += 1;
                self.escrow += fee;
                self.ledger.fees_received += fee;
            }
            EventKind::BlockSubmitted {
                request_id,
                aggregator,
                block_hash,
                validator_bits,
                post_state_root,
                next_seed,
            } => {
                let pending = self
                    .requests
                    .get(request_id)
                    .is_some_and(|r| r.status == RequestStatus::Pending);
                if !pending {
                    return Err(corrupt(seq, format!("request {request_id} not pending")));
                }
                let expected_aggregator = self.current_aggregator().ok();
                let rewards = self.config.rewards_per_submission();
                if expected_aggregator != Some(*aggregator)
                    || validator_bits.count() != self.config.threshold() as u64
                    || !validator_bits.fits(self.tree.capacity())
                    || self.escrow < rewards
                    || next_seed.is_some() != (self.config.selection == Selection::Randomized)
                {
                    return Err(corrupt(seq, "submission inconsistent with contract state"));
                }
                let mut tree = self.tree.clone();
                tree.credit(*aggregator, unit(self.config.agg_reward))?;
                for i in validator_bits.indices() {
                    tree.credit(i, unit(self.config.val_reward))?;
                }
                if tree.root() != *post_state_root {
                    return Err(corrupt(seq, "post-state root does not match rewarded tree"));
                }
                self.now = event.time;
                self.tree = tree;
                let r = self.requests.get_mut(request_id).expect("checked above");
                r.status = RequestStatus::Answered;
                r.answer_hash = Some(*block_hash);
                r.validator_bits = Some(validator_bits.clone());
                r.answered_by = Some(*aggregator);
                r.answered_at = Some(event.time);
                self.escrow -= rewards;
                self.ledger.rewards_credited += rewards;
                self.advance_turn(*aggregator, *next_seed);
            }
            EventKind::Slashed {
                request_id,
                agg_index,
                val_index,
                amount,
                post_state_root,
            } => {
                let answered_by = self.requests.get(request_id).and_then(|r| r.answered_by);
                let victim = self.tree.account(*val_index)?;
                if answered_by != Some(*agg_index)
                    || agg_index == val_index
                    || self.is_slashed(*request_id, *val_index)
                    || victim.balance_units() != Some(*amount)
                {
                    return Err(corrupt(seq, "slash inconsistent with contract state"));
                }
                let mut tree = self.tree.clone();
                let mut zeroed = victim;
                zeroed.balance = FieldElement::zero();
                tree.set_account(*val_index, zeroed)?;
                tree.credit(*agg_index, unit(*amount))?;
                if tree.root() != *post_state_root {
                    return Err(corrupt(seq, "post-state root does not match slashed tree"));
                }
                self.now = event.time;
                self.tree = tree;
                self.slashed.insert((*request_id, *val_index));
                self.ledger.slashed += amount;
            }
            EventKind::AggregatorTimedOut { aggregator } => {
                let overdue = self.deadline().is_some_and(|d| event.time >= d);
                if !overdue || self.current_aggregator().ok() != Some(*aggregator) {
                    return Err(corrupt(seq, "timeout not due"));
                }
                self.now = event.time;
                self.timeouts += 1;
                self.advance_turn(*aggregator, None);
            }
        }
        self.state_root = self.tree.root();
        self.log.push(event);
        Ok(())
    }
}
