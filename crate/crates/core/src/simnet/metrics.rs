use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::crypto::FieldElement;

/// One client request and what became of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestRow {
    pub request_id: u64,
    pub round: u64,
    pub block_number: u64,
    pub requested_at: u64,
    /// Canonical final hash at request time, or 0 for an absent block.
    pub expected_hash: FieldElement,
    pub answer_hash: Option<FieldElement>,
    pub answered_at: Option<u64>,
    pub aggregator: Option<u64>,
    pub votes_received: usize,
    pub validator_bits: Vec<u64>,
    pub slashes: u64,
    pub agg_constraints: u64,
    pub slash_constraints: u64,
    pub proof_bytes: usize,
}

impl RequestRow {
    pub fn answered(&self) -> bool {
        self.answer_hash.is_some()
    }

    pub fn correct(&self) -> Option<bool> {
        self.answer_hash.map(|h| h == self.expected_hash)
    }

    pub fn latency(&self) -> Option<u64> {
        self.answered_at.map(|t| t - self.requested_at)
    }
}

pub const CSV_HEADER: &str = "request_id,round,block_number,requested_at,expected_hash,answered,answer_hash,correct,answered_at,latency,aggregator,votes_received,validator_bits,slashes,agg_constraints,slash_constraints,proof_bytes";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Aggregates over a run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Summary {
    pub name: String,
    pub seed: u64,
    pub threshold: usize,
    pub requests: u64,
    pub answered: u64,
    pub wrong_answers: u64,
    pub liveness_stalls: u64,
    pub max_latency: u64,
    pub slashes: u64,
    pub timeouts: u64,
    pub rejected_submissions: u64,
    pub rejected_votes: BTreeMap<&'static str, u64>,
    pub messages_sent: u64,
    pub messages_dropped: u64,
    pub chain_retries: u64,
    pub reorgs: u64,
    pub events: u64,
    pub final_root: FieldElement,
    pub balances: Vec<u128>,
    pub initial_stakes: Vec<u128>,
    pub participations: Vec<u64>,
    pub aggregations: Vec<u64>,
    pub expect_violation: bool,
    pub passed: bool,
}

/// Everything a run reports.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Metrics {
    pub rows: Vec<RequestRow>,
    pub summary: Summary,
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

impl Metrics {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.request_id,
                r.round,
                r.block_number,
                r.requested_at,
                r.expected_hash,
                u8::from(r.answered()),
                opt(r.answer_hash),
                opt(r.correct().map(u8::from)),
                opt(r.answered_at),
                opt(r.latency()),
                opt(r.aggregator),
                r.votes_received,
                join(&r.validator_bits),
                r.slashes,
                r.agg_constraints,
                r.slash_constraints,
                r.proof_bytes,
            );
        }
        out
    }

    /// `key=value` lines; list values are space separated.
    pub fn summary_text(&self) -> String {
        let s = &self.summary;
        let rejected: u64 = s.rejected_votes.values().sum();
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("name", s.name.clone());
        kv("seed", s.seed.to_string());
        kv("threshold", s.threshold.to_string());
        kv("requests", s.requests.to_string());
        kv("answered", s.answered.to_string());
        kv("wrong_answers", s.wrong_answers.to_string());
        kv("liveness_stalls", s.liveness_stalls.to_string());
        kv("max_latency", s.max_latency.to_string());
        kv("slashes", s.slashes.to_string());
        kv("timeouts", s.timeouts.to_string());
        kv("rejected_submissions", s.rejected_submissions.to_string());
        kv("rejected_votes", rejected.to_string());
        for (label, n) in &s.rejected_votes {
            kv(&format!("rejected_votes.{label}"), n.to_string());
        }
        kv("messages_sent", s.messages_sent.to_string());
        kv("messages_dropped", s.messages_dropped.to_string());
        kv("chain_retries", s.chain_retries.to_string());
        kv("reorgs", s.reorgs.to_string());
        kv("events", s.events.to_string());
        kv("final_root", s.final_root.to_string());
        kv("initial_stakes", join(&s.initial_stakes));
        kv("balances", join(&s.balances));
        kv("participations", join(&s.participations));
        kv("aggregations", join(&s.aggregations));
        kv("expect_violation", s.expect_violation.to_string());
        kv(
            "verdict",
            if s.passed { "pass" } else { "fail" }.to_string(),
        );
        out
    }
}

/// Reads a `key=value` summary back into a map.
pub fn parse_summary(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_owned(), v.to_owned()))
        .collect()
}
