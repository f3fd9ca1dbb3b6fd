//! Deterministic emulation of the on-chain oracle contract.
//!
//! [`ContractState`] is pure state plus [`ContractState::apply`], the single
//! place where an event changes it. Live transactions on [`Contract`]
//! validate their inputs (including proof verification), emit an event and
//! apply it, so replaying the log goes through exactly the same code.

mod event;
mod state;

use std::fmt;
use std::str::FromStr;

use crate::circuits::{
    backend_by_id, majority_threshold, AggregationPublic, CircuitError, CircuitParams, Proof,
    ProofBackend, PublicInputs, RotationPublic, SlashPublic, ValidatorBits,
};
use crate::crypto::{CurvePoint, FieldElement};
use crate::tree::{verify_proof, Account, MerkleProof, TreeError, MAX_DEPTH};

pub use event::{Event, EventKind, EventLog};
pub use state::{ContractState, Ledger, Request, RequestStatus};

/// An externally owned account on the host chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address(pub u64);

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Address {
    type Err = std::num::ParseIntError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(Address)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContractError {
    #[error("stake below the minimum of {min}")]
    InsufficientStake { min: u128 },
    #[error("stake above the cap of {max}")]
    StakeTooHigh { max: u128 },
    #[error("committee is full; use replace")]
    CommitteeFull,
    #[error("stake does not exceed the target's balance")]
    StakeTooLow,
    #[error("slot {0} is empty")]
    EmptySlot(u64),
    #[error("invalid proof")]
    InvalidProof,
    #[error("caller does not own the account")]
    NotOwner,
    #[error("account is already exiting")]
    AlreadyExiting,
    #[error("account has not announced its exit")]
    NotExiting,
    #[error("exit time {exit_time} not reached")]
    ExitTimeNotReached { exit_time: u64 },
    #[error("fee below the request fee of {min}")]
    FeeTooLow { min: u128 },
    #[error("no committee members")]
    NoCommittee,
    #[error("caller is not the aggregator")]
    NotAggregator,
    #[error("unknown request {0}")]
    UnknownRequest(u64),
    #[error("request is not pending")]
    RequestNotPending,
    #[error("request is still pending")]
    RequestPending,
    #[error("vote already slashed")]
    AlreadySlashed,
    #[error("escrow cannot cover the rewards")]
    InsufficientEscrow,
    #[error("no pending request has passed its deadline")]
    TimeoutNotReached,
    #[error("time cannot move backwards")]
    ClockSkew,
    #[error("public key is not a valid subgroup point")]
    InvalidPoint,
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("corrupt event log: {0}")]
    CorruptLog(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// How the contract picks the aggregator responsible for pending requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    RoundRobin,
    /// The aggregator multiplies a public curve-point seed by its secret key
    /// on each submission, proved inside the aggregation circuit.
    Randomized,
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selection::RoundRobin => "round_robin",
            Selection::Randomized => "randomized",
        })
    }
}

impl FromStr for Selection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "round_robin" => Ok(Selection::RoundRobin),
            "randomized" => Ok(Selection::Randomized),
            other => Err(format!("unknown selection mode {other:?}")),
        }
    }
}

pub const DEFAULT_MIN_STAKE: u128 = 100;
pub const DEFAULT_VAL_REWARD: u128 = 10;
pub const DEFAULT_AGG_REWARD: u128 = 50;
pub const EXIT_DELAY: u64 = 7 * 24 * 3600;
pub const DEFAULT_AGG_TIMEOUT: u64 = 60;
/// Stakes are capped so that the sum of all balances plus any realistic
/// reward total stays below 2^128 and never wraps in the field.
pub const MAX_STAKE: u128 = 1 << 112;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractConfig {
    pub depth: u32,
    pub min_stake: u128,
    pub max_stake: u128,
    pub val_reward: u128,
    pub agg_reward: u128,
    pub request_fee: u128,
    pub exit_delay: u64,
    pub agg_timeout: u64,
    pub selection: Selection,
    pub backend: String,
}

impl Default for ContractConfig {
    fn default() -> Self {
        ContractConfig::new(crate::tree::DEFAULT_DEPTH)
    }
}

impl ContractConfig {
    pub fn new(depth: u32) -> Self {
        let t = majority_threshold(depth) as u128;
        ContractConfig {
            depth,
            min_stake: DEFAULT_MIN_STAKE,
            max_stake: MAX_STAKE,
            val_reward: DEFAULT_VAL_REWARD,
            agg_reward: DEFAULT_AGG_REWARD,
            request_fee: DEFAULT_AGG_REWARD + t * DEFAULT_VAL_REWARD,
            exit_delay: EXIT_DELAY,
            agg_timeout: DEFAULT_AGG_TIMEOUT,
            selection: Selection::RoundRobin,
            backend: "transparent".into(),
        }
    }

    pub fn threshold(&self) -> usize {
        majority_threshold(self.depth)
    }

    pub fn capacity(&self) -> u64 {
        1 << self.depth
    }

    /// Rewards credited by one submission.
    pub fn rewards_per_submission(&self) -> u128 {
        self.agg_reward + self.threshold() as u128 * self.val_reward
    }

    pub fn circuit_params(&self) -> CircuitParams {
        let mut p = CircuitParams::new(self.depth, self.agg_reward, self.val_reward);
        p.rotation = self.selection == Selection::Randomized;
        p
    }

    pub fn validate(&self) -> Result<(), ContractError> {
        let bad = |m: String| Err(ContractError::Config(m));
        if self.depth == 0 || self.depth > MAX_DEPTH {
            return bad(format!("depth must be in 1..={MAX_DEPTH}"));
        }
        if self.min_stake == 0 || self.min_stake > self.max_stake || self.max_stake > MAX_STAKE {
            return bad(format!("need 0 < min_stake <= max_stake <= {MAX_STAKE}"));
        }
        if self.agg_reward <= self.val_reward {
            return bad("agg_reward must exceed val_reward".into());
        }
        if self.request_fee < self.rewards_per_submission() {
            return bad(format!(
                "request_fee {} cannot cover rewards {}",
                self.request_fee,
                self.rewards_per_submission()
            ));
        }
        if self.agg_timeout == 0 {
            return bad("agg_timeout must be positive".into());
        }
        backend_by_id(&self.backend).map_err(|e| ContractError::Config(e.to_string()))?;
        Ok(())
    }
}

impl fmt::Display for ContractConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "config depth={} min_stake={} max_stake={} val_reward={} agg_reward={} request_fee={} \
             exit_delay={} agg_timeout={} selection={} backend={}",
            self.depth,
            self.min_stake,
            self.max_stake,
            self.val_reward,
            self.agg_reward,
            self.request_fee,
            self.exit_delay,
            self.agg_timeout,
            self.selection,
            self.backend
        )
    }
}

impl FromStr for ContractConfig {
    type Err = ContractError;
    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some("config") {
            return Err(ContractError::Config("expected `config` header".into()));
        }
        let mut f = event::Fields::parse(tokens)?;
        let config = ContractConfig {
            depth: f.take("depth")?,
            min_stake: f.take("min_stake")?,
            max_stake: f.take("max_stake")?,
            val_reward: f.take("val_reward")?,
            agg_reward: f.take("agg_reward")?,
            request_fee: f.take("request_fee")?,
            exit_delay: f.take("exit_delay")?,
            agg_timeout: f.take("agg_timeout")?,
            selection: f.take("selection")?,
            backend: f.take("backend")?,
        };
        f.finish()?;
        config
            .validate()
            .map_err(|e| ContractError::CorruptLog(e.to_string()))?;
        Ok(config)
    }
}

/// The aggregator's `submit_block` transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Submission {
    pub request_id: u64,
    pub block_hash: FieldElement,
    pub validator_bits: ValidatorBits,
    pub post_state_root: FieldElement,
    /// Present only in randomized selection mode.
    pub next_seed: Option<CurvePoint>,
    pub proof: Proof,
}

/// A `slash` transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlashTx {
    pub request_id: u64,
    pub agg_index: u64,
    pub val_index: u64,
    pub post_state_root: FieldElement,
    pub proof: Proof,
}

/// Contract state together with the proof verifier.
pub struct Contract {
    state: ContractState,
    backend: Box<dyn ProofBackend>,
}

impl fmt::Debug for Contract {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Contract")
            .field("backend", &self.backend.id())
            .field("state", &self.state)
            .finish()
    }
}

fn check_membership(
    root: &FieldElement,
    account: &Account,
    proof: &MerkleProof,
) -> Result<(), ContractError> {
    let ok = proof.leaf == account.leaf_hash()
        && proof.index() == account.index
        && verify_proof(root, proof).unwrap_or(false);
    if ok {
        Ok(())
    } else {
        Err(ContractError::InvalidProof)
    }
}

impl Contract {
    pub fn new(config: ContractConfig) -> Result<Self, ContractError> {
        let backend = backend_by_id(&config.backend)?;
        Ok(Contract {
            state: ContractState::genesis(config)?,
            backend,
        })
    }

    /// Rebuilds a contract from its event log.
    pub fn replay(log: &EventLog) -> Result<Self, ContractError> {
        let backend = backend_by_id(&log.config.backend)?;
        Ok(Contract {
            state: ContractState::replay(log)?,
            backend,
        })
    }

    pub fn state(&self) -> &ContractState {
        &self.state
    }

    pub fn config(&self) -> &ContractConfig {
        self.state.config()
    }

    pub fn backend(&self) -> &dyn ProofBackend {
        self.backend.as_ref()
    }

    pub fn now(&self) -> u64 {
        self.state.now()
    }

    pub fn set_time(&mut self, now: u64) -> Result<(), ContractError> {
        self.state.set_time(now)
    }

    fn emit(&mut self, kind: EventKind) -> Result<(), ContractError> {
        let event = Event {
            seq: self.state.log().len() as u64,
            time: self.state.now(),
            kind,
        };
        self.state.apply(event)
    }

    fn check_stake(&self, stake: u128) -> Result<(), ContractError> {
        let c = self.config();
        if stake < c.min_stake {
            return Err(ContractError::InsufficientStake { min: c.min_stake });
        }
        if stake > c.max_stake {
            return Err(ContractError::StakeTooHigh { max: c.max_stake });
        }
        Ok(())
    }

    fn check_newcomer(pubkey: &CurvePoint, ip: &str) -> Result<(), ContractError> {
        if !pubkey.is_on_curve() || pubkey.is_identity() || !pubkey.is_in_prime_subgroup() {
            return Err(ContractError::InvalidPoint);
        }
        if ip.is_empty() || ip.chars().any(|c| c.is_whitespace() || c == '=') {
            return Err(ContractError::InvalidInput(
                "ip must be a non-empty token without '='",
            ));
        }
        Ok(())
    }

    /// Places a new member at the lowest empty slot.
    pub fn register(
        &mut self,
        caller: Address,
        pubkey: CurvePoint,
        ip: &str,
        stake: u128,
    ) -> Result<u64, ContractError> {
        self.check_stake(stake)?;
        Self::check_newcomer(&pubkey, ip)?;
        let index = self
            .state
            .lowest_empty()
            .ok_or(ContractError::CommitteeFull)?;
        self.emit(EventKind::Registered {
            index,
            owner: caller,
            pubkey,
            ip: ip.to_owned(),
            stake,
        })?;
        Ok(index)
    }

    /// Displaces the member at `target_index` by staking strictly more than
    /// its balance. The displaced stake is paid out to its owner.
    #[allow(clippy::too_many_arguments)]
    pub fn replace(
        &mut self,
        caller: Address,
        pubkey: CurvePoint,
        ip: &str,
        stake: u128,
        target_index: u64,
        target: &Account,
        proof: &MerkleProof,
    ) -> Result<u64, ContractError> {
        self.check_stake(stake)?;
        Self::check_newcomer(&pubkey, ip)?;
        if target.index != target_index {
            return Err(ContractError::InvalidProof);
        }
        check_membership(&self.state.state_root(), target, proof)?;
        if target.is_empty() {
            return Err(ContractError::EmptySlot(target_index));
        }
        let displaced_balance = target.balance_units().ok_or(ContractError::InvalidProof)?;
        if stake <= displaced_balance {
            return Err(ContractError::StakeTooLow);
        }
        let displaced_owner = self
            .state
            .owner_of(target_index)
            .ok_or(ContractError::EmptySlot(target_index))?;
        self.emit(EventKind::Replaced {
            index: target_index,
            owner: caller,
            pubkey,
            ip: ip.to_owned(),
            stake,
            displaced_owner,
            displaced_balance,
        })?;
        Ok(target_index)
    }

    /// Announces departure; returns the earliest withdrawal time.
    pub fn exit(
        &mut self,
        caller: Address,
        account: &Account,
        proof: &MerkleProof,
    ) -> Result<u64, ContractError> {
        check_membership(&self.state.state_root(), account, proof)?;
        if self.state.owner_of(account.index) != Some(caller) {
            return Err(ContractError::NotOwner);
        }
        if self.state.exit_time_of(account.index).is_some() {
            return Err(ContractError::AlreadyExiting);
        }
        let exit_time = self.now() + self.config().exit_delay;
        self.emit(EventKind::Exited {
            index: account.index,
            exit_time,
        })?;
        Ok(exit_time)
    }

    /// Empties the slot after the exit delay and pays out the balance.
    pub fn withdraw(
        &mut self,
        caller: Address,
        account: &Account,
        proof: &MerkleProof,
    ) -> Result<u128, ContractError> {
        let exit_time = self
            .state
            .exit_time_of(account.index)
            .ok_or(ContractError::NotExiting)?;
        check_membership(&self.state.state_root(), account, proof)?;
        if self.state.owner_of(account.index) != Some(caller) {
            return Err(ContractError::NotOwner);
        }
        if self.now() < exit_time {
            return Err(ContractError::ExitTimeNotReached { exit_time });
        }
        let amount = account.balance_units().ok_or(ContractError::InvalidProof)?;
        self.emit(EventKind::Withdrawn {
            index: account.index,
            owner: caller,
            amount,
        })?;
        Ok(amount)
    }

    pub fn request_block(
        &mut self,
        client: Address,
        block_number: u64,
        fee: u128,
    ) -> Result<u64, ContractError> {
        if fee < self.config().request_fee {
            return Err(ContractError::FeeTooLow {
                min: self.config().request_fee,
            });
        }
        let request_id = self.state.next_request_id();
        self.emit(EventKind::BlockRequested {
            request_id,
            client,
            block_number,
            fee,
        })?;
        Ok(request_id)
    }

    pub fn get_aggregator(&self) -> Result<u64, ContractError> {
        self.state.current_aggregator()
    }

    /// Public inputs the contract checks an aggregation proof against.
    pub fn aggregation_public(&self, aggregator: u64, sub: &Submission) -> AggregationPublic {
        AggregationPublic {
            pre_state_root: self.state.state_root(),
            post_state_root: sub.post_state_root,
            block_hash: sub.block_hash,
            request_id: sub.request_id,
            aggregator_index: aggregator,
            validator_bits: sub.validator_bits.clone(),
            rotation: match self.config().selection {
                Selection::RoundRobin => None,
                Selection::Randomized => Some(RotationPublic {
                    seed: self.state.seed(),
                    next_seed: sub.next_seed.unwrap_or_else(CurvePoint::zero),
                }),
            },
        }
    }

    pub fn submit_block(&mut self, caller: Address, sub: &Submission) -> Result<(), ContractError> {
        let aggregator = self.get_aggregator()?;
        if self.state.owner_of(aggregator) != Some(caller) {
            return Err(ContractError::NotAggregator);
        }
        let request = self
            .state
            .request(sub.request_id)
            .ok_or(ContractError::UnknownRequest(sub.request_id))?;
        if request.status != RequestStatus::Pending {
            return Err(ContractError::RequestNotPending);
        }
        if self.state.escrow() < self.config().rewards_per_submission() {
            return Err(ContractError::InsufficientEscrow);
        }
        let randomized = self.config().selection == Selection::Randomized;
        if sub.next_seed.is_some() != randomized {
            return Err(ContractError::InvalidProof);
        }
        let public = PublicInputs::Aggregation(self.aggregation_public(aggregator, sub));
        if !self
            .backend
            .verify(&self.config().circuit_params(), &public, &sub.proof)?
        {
            return Err(ContractError::InvalidProof);
        }
        self.emit(EventKind::BlockSubmitted {
            request_id: sub.request_id,
            aggregator,
            block_hash: sub.block_hash,
            validator_bits: sub.validator_bits.clone(),
            post_state_root: sub.post_state_root,
            next_seed: sub.next_seed,
        })
    }

    pub fn slash_public(&self, tx: &SlashTx) -> Result<SlashPublic, ContractError> {
        let request = self
            .state
            .request(tx.request_id)
            .ok_or(ContractError::UnknownRequest(tx.request_id))?;
        let block_hash = request.answer_hash.ok_or(ContractError::RequestPending)?;
        Ok(SlashPublic {
            pre_state_root: self.state.state_root(),
            post_state_root: tx.post_state_root,
            block_hash,
            request_id: tx.request_id,
            agg_index: tx.agg_index,
            val_index: tx.val_index,
        })
    }

    /// Only the aggregator that answered a request may slash its dissenters.
    pub fn slash(&mut self, caller: Address, tx: &SlashTx) -> Result<(), ContractError> {
        let request = self
            .state
            .request(tx.request_id)
            .ok_or(ContractError::UnknownRequest(tx.request_id))?;
        if request.status != RequestStatus::Answered {
            return Err(ContractError::RequestPending);
        }
        if request.answered_by != Some(tx.agg_index)
            || self.state.owner_of(tx.agg_index) != Some(caller)
        {
            return Err(ContractError::NotAggregator);
        }
        if self.state.is_slashed(tx.request_id, tx.val_index) {
            return Err(ContractError::AlreadySlashed);
        }
        let public = PublicInputs::Slash(self.slash_public(tx)?);
        if !self
            .backend
            .verify(&self.config().circuit_params(), &public, &tx.proof)?
        {
            return Err(ContractError::InvalidProof);
        }
        let amount = self
            .state
            .tree()
            .account(tx.val_index)?
            .balance_units()
            .ok_or(ContractError::InvalidProof)?;
        self.emit(EventKind::Slashed {
            request_id: tx.request_id,
            agg_index: tx.agg_index,
            val_index: tx.val_index,
            amount,
            post_state_root: tx.post_state_root,
        })
    }

    /// Skips the current aggregator once a pending request is overdue.
    /// Anyone may call it. Returns the new aggregator.
    pub fn timeout_aggregator(&mut self) -> Result<u64, ContractError> {
        let deadline = self
            .state
            .deadline()
            .ok_or(ContractError::TimeoutNotReached)?;
        if self.now() < deadline {
            return Err(ContractError::TimeoutNotReached);
        }
        let aggregator = self.get_aggregator()?;
        self.emit(EventKind::AggregatorTimedOut { aggregator })?;
        self.get_aggregator()
    }
}
