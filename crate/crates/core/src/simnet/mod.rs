//! Deterministic discrete-event simulation of a committee answering block
//! requests against a mock source chain, with message delay and loss,
//! chain outages, forks and static adversaries.
//!
//! Everything runs on one logical clock. Pending actions sit in a queue
//! ordered by `(time, insertion sequence)`, and every random draw comes from
//! a ChaCha stream derived from the scenario seed, so a config and seed
//! always produce the same metrics and event log.

mod bus;
mod chain;
mod config;
mod metrics;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuits::{backend_by_id, cost, ProofBackend};
use crate::contract::{
    Address, Contract, ContractConfig, ContractError, EventKind, EventLog, RequestStatus,
    Submission,
};
use crate::crypto::{keygen, mimc_hash_n, FieldElement};
use crate::nodes::{NodeError, OracleNode, VoteRejection};
use crate::vote::Vote;

pub use bus::{bus_deliver, Bus, BusPolicy, DelaySpec};
pub use chain::{ForkSpec, MockChain};
pub use config::{Adversary, Behavior, ScenarioConfig};
pub use metrics::{parse_summary, Metrics, RequestRow, Summary, CSV_HEADER};

/// Blocks on the mock chain before the first round.
pub const INITIAL_BLOCKS: u64 = 128;
/// Back-off after a failed chain query.
pub const CHAIN_RETRY: u64 = 2;
/// How far past the tip an absent-block request points.
pub const ABSENT_OFFSET: u64 = 10_000;
const COLLUDE_TAG: u64 = 0xbad;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario config: {0}")]
    Config(String),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error(transparent)]
    Node(#[from] NodeError),
}

/// Metrics plus the contract's full event log.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub metrics: Metrics,
    pub log: EventLog,
}

/// The hash that colluding adversaries agree on for a request.
pub fn colluding_hash(request_id: u64, behavior: Behavior) -> FieldElement {
    match behavior {
        Behavior::ZeroVote => FieldElement::zero(),
        _ => mimc_hash_n([
            FieldElement::from_u64(request_id),
            FieldElement::from_u64(COLLUDE_TAG),
        ]),
    }
}

#[derive(Debug)]
enum Action {
    Round(u64),
    ChainTick,
    Query { node: usize, request: u64 },
    Deliver { to: usize, vote: Vote },
    Resend { node: usize, request: u64 },
    Collect { node: usize, request: u64 },
    TimeoutCheck,
}

struct SimNode {
    node: OracleNode,
    owner: Address,
    behavior: Behavior,
    /// Votes this node keeps (re)sending, per pending request.
    outbox: BTreeMap<u64, Vec<Vote>>,
    collecting: BTreeSet<u64>,
    forged: BTreeSet<u64>,
}

struct Sim {
    cfg: ScenarioConfig,
    contract: Contract,
    backend: Box<dyn ProofBackend>,
    chain: MockChain,
    bus: Bus,
    workload: ChaCha8Rng,
    faults: ChaCha8Rng,
    nodes: Vec<SimNode>,
    queue: BTreeMap<(u64, u64), Action>,
    seq: u64,
    now: u64,
    end: u64,
    delivered: usize,
    rows: BTreeMap<u64, RequestRow>,
    round_of: BTreeMap<u64, u64>,
    timeout_checks: BTreeSet<u64>,
    aggregator: Option<u64>,
    summary: Summary,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Runs a scenario to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome, SimError> {
    cfg.validate()?;
    let mut sim = Sim::new(cfg.clone())?;
    sim.run()?;
    Ok(sim.finish())
}

impl Sim {
    fn new(cfg: ScenarioConfig) -> Result<Self, SimError> {
        let mut config = ContractConfig::new(cfg.depth);
        config.agg_timeout = cfg.agg_timeout;
        config.selection = cfg.selection;
        config.validate()?;
        let backend = backend_by_id(&config.backend).map_err(ContractError::from)?;
        let mut contract = Contract::new(config.clone())?;

        let mut keys_rng = stream(cfg.seed, 5);
        let mut nodes = Vec::new();
        for i in 0..cfg.committee {
            let mut seed = [0u8; 32];
            keys_rng.fill_bytes(&mut seed);
            let keys = keygen(&seed);
            let owner = Address(10_000 + i);
            let index = contract.register(
                owner,
                keys.public,
                &format!("node-{i}"),
                cfg.stake + u128::from(i),
            )?;
            debug_assert_eq!(index, i);
            nodes.push(SimNode {
                node: OracleNode::new(keys, config.clone())?.with_finality(cfg.finality),
                owner,
                behavior: cfg.behavior(i),
                outbox: BTreeMap::new(),
                collecting: BTreeSet::new(),
                forged: BTreeSet::new(),
            });
        }
        let last_round = cfg.rounds * cfg.round_interval;
        let end = last_round + cfg.committee * cfg.agg_timeout + cfg.round_interval;
        let bus = Bus::new(
            BusPolicy {
                delay: cfg.delay,
                drop_rate: cfg.drop_rate,
            },
            stream(cfg.seed, 1),
        );
        let summary = Summary {
            name: cfg.name.clone(),
            seed: cfg.seed,
            threshold: cfg.threshold(),
            expect_violation: cfg.expect_violation,
            initial_stakes: (0..cfg.committee)
                .map(|i| cfg.stake + u128::from(i))
                .collect(),
            ..Summary::default()
        };
        let mut sim = Sim {
            contract,
            backend,
            chain: MockChain::new(INITIAL_BLOCKS),
            bus,
            workload: stream(cfg.seed, 2),
            faults: stream(cfg.seed, 3),
            nodes,
            queue: BTreeMap::new(),
            seq: 0,
            now: 0,
            end,
            delivered: 0,
            rows: BTreeMap::new(),
            round_of: BTreeMap::new(),
            timeout_checks: BTreeSet::new(),
            aggregator: None,
            summary,
            cfg,
        };
        sim.after_tx()?;
        for r in 1..=sim.cfg.rounds {
            sim.push(r * sim.cfg.round_interval, Action::Round(r));
        }
        sim.push(sim.cfg.block_interval, Action::ChainTick);
        Ok(sim)
    }

    fn push(&mut self, at: u64, action: Action) {
        self.queue.insert((at, self.seq), action);
        self.seq += 1;
    }

    fn run(&mut self) -> Result<(), SimError> {
        while let Some(((at, _), action)) = self.queue.pop_first() {
            if at > self.end {
                break;
            }
            self.now = at;
            self.contract.set_time(at)?;
            match action {
                Action::Round(r) => self.round(r)?,
                Action::ChainTick => self.chain_tick(),
                Action::Query { node, request } => self.query(node, request)?,
                Action::Deliver { to, vote } => self.deliver(to, vote)?,
                Action::Resend { node, request } => {
                    if self.is_pending(request) && self.nodes[node].outbox.contains_key(&request) {
                        self.send(node, request);
                        self.push(
                            at + self.cfg.resend_interval,
                            Action::Resend { node, request },
                        );
                    }
                }
                Action::Collect { node, request } => {
                    self.nodes[node].collecting.remove(&request);
                    if !self.attempt(node, request)?
                        && self.is_pending(request)
                        && self.nodes[node].node.is_aggregator()
                    {
                        self.nodes[node].collecting.insert(request);
                        self.push(
                            at + self.cfg.collect_window,
                            Action::Collect { node, request },
                        );
                    }
                }
                Action::TimeoutCheck => {
                    self.timeout_checks.remove(&at);
                    if self.contract.state().deadline().is_some_and(|d| d <= at) {
                        self.contract.timeout_aggregator()?;
                        self.after_tx()?;
                    }
                }
            }
        }
        Ok(())
    }

    fn is_pending(&self, request: u64) -> bool {
        self.contract.state().request(request).map(|r| r.status) == Some(RequestStatus::Pending)
    }

    fn round(&mut self, round: u64) -> Result<(), SimError> {
        let fee = self.contract.config().request_fee;
        for k in 0..self.cfg.requests_per_round {
            let tip = self.chain.tip_number();
            let (number, expected) = if self.workload.gen::<f64>() < self.cfg.absent_rate {
                (tip + ABSENT_OFFSET, FieldElement::zero())
            } else {
                let back = self.cfg.finality + self.workload.gen_range(0..20);
                let number = tip.saturating_sub(back);
                (
                    number,
                    self.chain.canonical_block(number).expect("below tip").hash,
                )
            };
            let client = Address(1_000_000 + round * 100 + k);
            let id = self.contract.request_block(client, number, fee)?;
            self.round_of.insert(id, round);
            self.rows.insert(
                id,
                RequestRow {
                    request_id: id,
                    round,
                    block_number: number,
                    requested_at: self.now,
                    expected_hash: expected,
                    answer_hash: None,
                    answered_at: None,
                    aggregator: None,
                    votes_received: 0,
                    validator_bits: Vec::new(),
                    slashes: 0,
                    agg_constraints: 0,
                    slash_constraints: 0,
                    proof_bytes: 0,
                },
            );
            self.after_tx()?;
        }
        Ok(())
    }

    fn chain_tick(&mut self) {
        let fork = (self.faults.gen::<f64>() < self.cfg.fork_rate).then(|| ForkSpec {
            attach: self.chain.tip_number(),
            length: 2,
        });
        if self.chain.advance(1, fork) {
            self.summary.reorgs += 1;
        }
        let next = self.now + self.cfg.block_interval;
        if next <= self.end {
            self.push(next, Action::ChainTick);
        }
    }

    /// Hands new contract events to every node and reacts to them.
    fn after_tx(&mut self) -> Result<(), SimError> {
        let events = self.contract.state().log()[self.delivered..].to_vec();
        self.delivered += events.len();
        for n in &mut self.nodes {
            n.node.sync(&events)?;
        }
        for e in &events {
            match &e.kind {
                EventKind::BlockRequested { request_id, .. } => {
                    for node in 0..self.nodes.len() {
                        self.query(node, *request_id)?;
                    }
                }
                EventKind::BlockSubmitted {
                    request_id,
                    aggregator,
                    block_hash,
                    validator_bits,
                    ..
                } => {
                    if let Some(row) = self.rows.get_mut(request_id) {
                        row.answer_hash = Some(*block_hash);
                        row.answered_at = Some(e.time);
                        row.aggregator = Some(*aggregator);
                        row.validator_bits = validator_bits.indices();
                        row.agg_constraints =
                            cost::aggregation(&self.contract.config().circuit_params());
                    }
                    for n in &mut self.nodes {
                        n.outbox.remove(request_id);
                    }
                }
                EventKind::Slashed { request_id, .. } => {
                    self.summary.slashes += 1;
                    if let Some(row) = self.rows.get_mut(request_id) {
                        row.slashes += 1;
                        row.slash_constraints =
                            cost::slash(&self.contract.config().circuit_params());
                    }
                }
                EventKind::AggregatorTimedOut { .. } => self.summary.timeouts += 1,
                _ => {}
            }
        }
        let aggregator = self.contract.state().current_aggregator().ok();
        if aggregator != self.aggregator {
            self.aggregator = aggregator;
            for node in 0..self.nodes.len() {
                let pending: Vec<u64> = self.nodes[node].outbox.keys().copied().collect();
                for request in pending {
                    self.send(node, request);
                }
            }
        }
        if let Some(deadline) = self.contract.state().deadline() {
            let at = deadline.max(self.now);
            if self.timeout_checks.insert(at) {
                self.push(at, Action::TimeoutCheck);
            }
        }
        Ok(())
    }

    /// A validator looks up the requested block and queues its vote(s).
    fn query(&mut self, node: usize, request: u64) -> Result<(), SimError> {
        let Some(block_number) = self
            .contract
            .state()
            .request(request)
            .filter(|r| r.status == RequestStatus::Pending)
            .map(|r| r.block_number)
        else {
            return Ok(());
        };
        if self.faults.gen::<f64>() < self.cfg.chain_failure_rate {
            self.chain.set_available(false);
            let res =
                self.nodes[node]
                    .node
                    .validator_on_request(request, block_number, &self.chain);
            self.chain.set_available(true);
            debug_assert!(matches!(res, Err(NodeError::ChainUnavailable(_))));
            self.summary.chain_retries += 1;
            self.push(self.now + CHAIN_RETRY, Action::Query { node, request });
            return Ok(());
        }
        let sim_node = &self.nodes[node];
        let honest = sim_node
            .node
            .validator_on_request(request, block_number, &self.chain)?;
        let index = honest.validator_index;
        let bad = || {
            sim_node
                .node
                .sign_vote(index, request, colluding_hash(request, sim_node.behavior))
        };
        let votes = match sim_node.behavior {
            Behavior::Honest | Behavior::OfflineAggregator => vec![honest],
            Behavior::WrongHash | Behavior::ZeroVote => vec![bad()],
            Behavior::Equivocate => {
                if self.faults.gen::<bool>() {
                    vec![honest, bad()]
                } else {
                    vec![bad(), honest]
                }
            }
            Behavior::DuplicateVote => vec![bad(); self.cfg.threshold()],
        };
        self.nodes[node].outbox.insert(request, votes);
        self.send(node, request);
        self.push(
            self.now + self.cfg.resend_interval,
            Action::Resend { node, request },
        );
        Ok(())
    }

    /// Sends a node's votes on `request` to whoever its replica says is the
    /// aggregator.
    fn send(&mut self, node: usize, request: u64) {
        let Some(to) = self.nodes[node]
            .node
            .aggregator_ip()
            .and_then(|ip| ip.strip_prefix("node-"))
            .and_then(|i| i.parse::<usize>().ok())
        else {
            return;
        };
        let votes = self.nodes[node]
            .outbox
            .get(&request)
            .cloned()
            .unwrap_or_default();
        for vote in votes {
            if let Some(at) = self.bus.schedule(node, to, self.now) {
                self.push(at, Action::Deliver { to, vote });
            }
        }
    }

    fn deliver(&mut self, to: usize, vote: Vote) -> Result<(), SimError> {
        let request = vote.request_id;
        match self.nodes[to].node.aggregator_on_vote(vote) {
            Ok(()) => {}
            Err(r) => {
                *self.summary.rejected_votes.entry(r.label()).or_default() += 1;
                if r != VoteRejection::Duplicate {
                    return Ok(());
                }
            }
        }
        if self.nodes[to].behavior == Behavior::OfflineAggregator {
            return Ok(());
        }
        let members = self.contract.state().tree().occupied().count();
        if self.nodes[to].node.mempool().vote_count(request) >= members {
            self.attempt(to, request)?;
        } else if self.nodes[to].collecting.insert(request) {
            self.push(
                self.now + self.cfg.collect_window,
                Action::Collect { node: to, request },
            );
        }
        Ok(())
    }

    /// The aggregator tries to answer `request`. Returns whether it did.
    fn attempt(&mut self, node: usize, request: u64) -> Result<bool, SimError> {
        let sim_node = &self.nodes[node];
        if sim_node.behavior == Behavior::OfflineAggregator
            || !sim_node.node.is_aggregator()
            || !self.is_pending(request)
        {
            return Ok(false);
        }
        let backend = self.backend.as_ref();
        if !sim_node.behavior.dissents() {
            let Some(sub) = sim_node.node.try_submit(request, backend)? else {
                return Ok(false);
            };
            return self.submit(node, sub, true);
        }

        // A corrupted aggregator answers with the colluding hash whenever the
        // votes allow it. Otherwise it tries to slip the hash past the
        // verifier once, then falls back to an honest answer and spares the
        // dissenters.
        let t = self.cfg.threshold();
        let colluding = colluding_hash(request, sim_node.behavior);
        let mut votes = sim_node.node.valid_votes(request, &colluding);
        if votes.len() >= t {
            votes.truncate(t);
            let sub = sim_node
                .node
                .prove_submission(request, colluding, &votes, backend)?;
            return self.submit(node, sub, false);
        }
        let Some(sub) = sim_node.node.try_submit(request, backend)? else {
            return Ok(false);
        };
        if self.nodes[node].forged.insert(request) {
            let mut forged = sub.clone();
            if forged.block_hash == colluding {
                forged.post_state_root += FieldElement::one();
            } else {
                forged.block_hash = colluding;
            }
            if self.submit(node, forged, false)? {
                return Ok(true);
            }
        }
        self.submit(node, sub, false)
    }

    fn submit(&mut self, node: usize, sub: Submission, slash: bool) -> Result<bool, SimError> {
        let request = sub.request_id;
        let owner = self.nodes[node].owner;
        let votes_received = self.nodes[node].node.mempool().vote_count(request);
        if self.contract.submit_block(owner, &sub).is_err() {
            self.summary.rejected_submissions += 1;
            return Ok(false);
        }
        if let Some(row) = self.rows.get_mut(&request) {
            row.votes_received = votes_received;
            row.proof_bytes = sub.proof.size();
        }
        self.after_tx()?;
        if slash {
            let txs = self.nodes[node]
                .node
                .build_slashes(request, self.backend.as_ref())?;
            for tx in txs {
                self.contract.slash(owner, &tx)?;
                self.after_tx()?;
            }
        }
        self.nodes[node].node.forget(request);
        Ok(true)
    }

    fn finish(self) -> ScenarioOutcome {
        let cfg = &self.cfg;
        let state = self.contract.state();
        let mut summary = self.summary;
        let rows: Vec<RequestRow> = self.rows.into_values().collect();
        let bound = cfg.committee * cfg.agg_timeout;
        summary.requests = rows.len() as u64;
        summary.answered = rows.iter().filter(|r| r.answered()).count() as u64;
        summary.wrong_answers = rows.iter().filter(|r| r.correct() == Some(false)).count() as u64;
        summary.liveness_stalls = rows
            .iter()
            .filter(|r| r.latency().map_or(true, |l| l > bound))
            .count() as u64;
        summary.max_latency = rows.iter().filter_map(|r| r.latency()).max().unwrap_or(0);
        summary.messages_sent = self.bus.sent();
        summary.messages_dropped = self.bus.dropped();
        summary.events = state.log().len() as u64;
        summary.final_root = state.state_root();
        summary.balances = (0..cfg.committee)
            .map(|i| {
                state
                    .tree()
                    .account(i)
                    .ok()
                    .and_then(|a| a.balance_units())
                    .unwrap_or(0)
            })
            .collect();
        summary.participations = vec![0; cfg.committee as usize];
        summary.aggregations = vec![0; cfg.committee as usize];
        for r in &rows {
            for &i in &r.validator_bits {
                summary.participations[i as usize] += 1;
            }
            if let Some(a) = r.aggregator {
                summary.aggregations[a as usize] += 1;
            }
        }
        let liveness_expected = cfg.drop_rate == 0.0
            && cfg.chain_failure_rate == 0.0
            && cfg.honest_voters() >= cfg.threshold();
        summary.passed = if cfg.expect_violation {
            summary.wrong_answers >= 1
        } else {
            summary.wrong_answers == 0
                && (!liveness_expected || summary.liveness_stalls == 0)
                && state.audit().is_ok()
        };
        ScenarioOutcome {
            metrics: Metrics { rows, summary },
            log: state.export_log(),
        }
    }
}

/// Bundled scenario files, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("honest_n4", include_str!("../../scenarios/honest_n4.json")),
    (
        "honest_randomized_n4",
        include_str!("../../scenarios/honest_randomized_n4.json"),
    ),
    (
        "safety_n4_wrong_hash",
        include_str!("../../scenarios/safety_n4_wrong_hash.json"),
    ),
    (
        "safety_n4_zero_vote",
        include_str!("../../scenarios/safety_n4_zero_vote.json"),
    ),
    (
        "safety_n4_equivocate",
        include_str!("../../scenarios/safety_n4_equivocate.json"),
    ),
    (
        "safety_n4_duplicate_vote",
        include_str!("../../scenarios/safety_n4_duplicate_vote.json"),
    ),
    ("safety_n8", include_str!("../../scenarios/safety_n8.json")),
    (
        "safety_n16",
        include_str!("../../scenarios/safety_n16.json"),
    ),
    (
        "liveness_offline_n4",
        include_str!("../../scenarios/liveness_offline_n4.json"),
    ),
    ("attack_n4", include_str!("../../scenarios/attack_n4.json")),
];

pub fn bundled(name: &str) -> Option<ScenarioConfig> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| ScenarioConfig::from_json(text).expect("bundled scenarios are valid"))
}

#[cfg(test)]
mod tests;
