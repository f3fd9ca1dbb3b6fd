use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuits::majority_threshold;
use crate::contract::Selection;
use crate::tree::MAX_DEPTH;

use super::bus::DelaySpec;
use super::SimError;

/// What a corrupted committee member does. Adversaries are fixed before
/// the run starts.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    #[default]
    Honest,
    /// Votes for the colluding hash.
    WrongHash,
    /// Always votes 0.
    ZeroVote,
    /// Sends both the honest and the colluding vote, in a coin-flipped order.
    Equivocate,
    /// Votes honestly but never aggregates on its turn.
    OfflineAggregator,
    /// Sends the colluding vote t times.
    DuplicateVote,
}

impl Behavior {
    pub fn label(self) -> &'static str {
        match self {
            Behavior::Honest => "honest",
            Behavior::WrongHash => "wrong_hash",
            Behavior::ZeroVote => "zero_vote",
            Behavior::Equivocate => "equivocate",
            Behavior::OfflineAggregator => "offline_aggregator",
            Behavior::DuplicateVote => "duplicate_vote",
        }
    }

    /// Behaviors that put a dishonest vote on the wire.
    pub fn dissents(self) -> bool {
        matches!(
            self,
            Behavior::WrongHash
                | Behavior::ZeroVote
                | Behavior::Equivocate
                | Behavior::DuplicateVote
        )
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Behavior {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Behavior::Honest,
            Behavior::WrongHash,
            Behavior::ZeroVote,
            Behavior::Equivocate,
            Behavior::OfflineAggregator,
            Behavior::DuplicateVote,
        ]
        .into_iter()
        .find(|b| b.label() == s)
        .ok_or_else(|| format!("unknown behavior {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Adversary {
    pub index: u64,
    pub behavior: Behavior,
}

fn d_depth() -> u32 {
    2
}
fn d_committee() -> u64 {
    4
}
fn d_stake() -> u128 {
    1000
}
fn d_rounds() -> u64 {
    10
}
fn d_one() -> u64 {
    1
}
fn d_round_interval() -> u64 {
    120
}
fn d_delay() -> DelaySpec {
    DelaySpec { min: 0, max: 2 }
}
fn d_agg_timeout() -> u64 {
    crate::contract::DEFAULT_AGG_TIMEOUT
}
fn d_finality() -> u64 {
    crate::nodes::DEFAULT_FINALITY
}
fn d_block_interval() -> u64 {
    12
}
fn d_absent_rate() -> f64 {
    0.1
}
fn d_resend() -> u64 {
    30
}
fn d_collect() -> u64 {
    10
}

/// A scenario file. JSON; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default = "d_depth")]
    pub depth: u32,
    /// Members registered at genesis, in slots `0..committee`.
    #[serde(default = "d_committee")]
    pub committee: u64,
    /// Initial stake of member `i` is `stake + i`, so stakes are distinct.
    #[serde(default = "d_stake")]
    pub stake: u128,
    #[serde(default)]
    pub adversaries: Vec<Adversary>,
    #[serde(default = "d_rounds")]
    pub rounds: u64,
    #[serde(default = "d_one")]
    pub requests_per_round: u64,
    #[serde(default = "d_round_interval")]
    pub round_interval: u64,
    #[serde(default = "d_delay")]
    pub delay: DelaySpec,
    #[serde(default)]
    pub drop_rate: f64,
    #[serde(default = "d_agg_timeout")]
    pub agg_timeout: u64,
    #[serde(default = "d_finality")]
    pub finality: u64,
    #[serde(default = "d_block_interval")]
    pub block_interval: u64,
    /// Chance per chain tick of a one-block fork that overtakes the tip.
    #[serde(default)]
    pub fork_rate: f64,
    /// Chance that a validator's chain query fails and is retried.
    #[serde(default)]
    pub chain_failure_rate: f64,
    /// Share of requests that ask for a block that does not exist yet.
    #[serde(default = "d_absent_rate")]
    pub absent_rate: f64,
    /// Validators resend unanswered votes this often.
    #[serde(default = "d_resend")]
    pub resend_interval: u64,
    /// How long an aggregator waits for stragglers after the first vote.
    #[serde(default = "d_collect")]
    pub collect_window: u64,
    #[serde(default)]
    pub selection: Selection,
    #[serde(default)]
    pub seed: u64,
    /// Marks an attack scenario: at least t adversaries and at least one
    /// wrong answer expected.
    #[serde(default)]
    pub expect_violation: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let config: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn threshold(&self) -> usize {
        majority_threshold(self.depth)
    }

    pub fn behavior(&self, index: u64) -> Behavior {
        self.adversaries
            .iter()
            .find(|a| a.index == index)
            .map_or(Behavior::Honest, |a| a.behavior)
    }

    pub fn adversary_count(&self) -> usize {
        self.adversaries
            .iter()
            .filter(|a| a.behavior != Behavior::Honest)
            .count()
    }

    /// Members that vote honestly: everyone except the dissenting adversaries.
    pub fn honest_voters(&self) -> usize {
        (0..self.committee)
            .filter(|&i| !self.behavior(i).dissents())
            .count()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.depth == 0 || self.depth > MAX_DEPTH {
            return bad(format!("depth must be in 1..={MAX_DEPTH}"));
        }
        if self.committee == 0 || self.committee > 1u64 << self.depth {
            return bad(format!("committee must be in 1..={}", 1u64 << self.depth));
        }
        if self.stake < crate::contract::DEFAULT_MIN_STAKE
            || self.stake > crate::contract::MAX_STAKE / 2
        {
            return bad("stake out of range".into());
        }
        let mut seen = BTreeSet::new();
        for a in &self.adversaries {
            if a.index >= self.committee {
                return bad(format!("adversary index {} outside committee", a.index));
            }
            if !seen.insert(a.index) {
                return bad(format!("adversary index {} listed twice", a.index));
            }
        }
        if self.adversary_count() >= self.threshold() && !self.expect_violation {
            return bad(format!(
                "{} adversaries reach the threshold {}; set expect_violation for an attack scenario",
                self.adversary_count(),
                self.threshold()
            ));
        }
        if self.delay.min > self.delay.max {
            return bad("delay.min exceeds delay.max".into());
        }
        for (name, p) in [
            ("drop_rate", self.drop_rate),
            ("fork_rate", self.fork_rate),
            ("chain_failure_rate", self.chain_failure_rate),
            ("absent_rate", self.absent_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1]"));
            }
        }
        if self.round_interval == 0
            || self.block_interval == 0
            || self.resend_interval == 0
            || self.collect_window == 0
        {
            return bad("intervals must be positive".into());
        }
        if self.agg_timeout == 0 {
            return bad("agg_timeout must be positive".into());
        }
        if self.requests_per_round == 0 {
            return bad("requests_per_round must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = ScenarioConfig::default();
        c.validate().unwrap();
        assert_eq!(c.threshold(), 3);
        assert_eq!(c.agg_timeout, 60);
        assert_eq!(c.finality, 6);
    }

    #[test]
    fn json_round_trip() {
        let mut c = ScenarioConfig::default();
        c.adversaries.push(Adversary {
            index: 3,
            behavior: Behavior::Equivocate,
        });
        c.selection = Selection::Randomized;
        assert_eq!(ScenarioConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            ScenarioConfig::from_json(r#"{"comittee": 4}"#),
            Err(SimError::Config(_))
        ));
        assert!(ScenarioConfig::from_json(r#"{"committee": 5, "depth": 2}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"drop_rate": 1.5}"#).is_err());
        assert!(ScenarioConfig::from_json(
            r#"{"adversaries": [{"index": 9, "behavior": "wrong_hash"}]}"#
        )
        .is_err());
        assert!(ScenarioConfig::from_json(
            r#"{"adversaries": [{"index": 1, "behavior": "lying"}]}"#
        )
        .is_err());
        assert!(ScenarioConfig::from_json("not json").is_err());
    }

    #[test]
    fn adversary_bound() {
        let three = r#"{"adversaries": [
            {"index": 0, "behavior": "wrong_hash"},
            {"index": 1, "behavior": "wrong_hash"},
            {"index": 2, "behavior": "wrong_hash"}]"#;
        assert!(ScenarioConfig::from_json(&format!("{three}}}")).is_err());
        let c =
            ScenarioConfig::from_json(&format!("{three}, \"expect_violation\": true}}")).unwrap();
        assert_eq!(c.adversary_count(), 3);
        assert_eq!(c.honest_voters(), 1);
    }

    #[test]
    fn behavior_names() {
        for b in [
            "honest",
            "wrong_hash",
            "zero_vote",
            "equivocate",
            "offline_aggregator",
            "duplicate_vote",
        ] {
            assert_eq!(b.parse::<Behavior>().unwrap().to_string(), b);
        }
    }
}
