use super::*;
use crate::contract::{ContractState, DEFAULT_AGG_REWARD, DEFAULT_VAL_REWARD};

fn quick(name: &str, rounds: u64) -> ScenarioConfig {
    let mut c = bundled(name).unwrap();
    c.rounds = rounds;
    c
}

#[test]
fn bundled_configs_parse() {
    for (name, _) in BUNDLED {
        let c = bundled(name).unwrap();
        assert_eq!(c.name, *name);
    }
}

#[test]
fn honest_rounds_pay_exact_rewards() {
    let out = run_scenario(&bundled("honest_n4").unwrap()).unwrap();
    let s = &out.metrics.summary;
    assert_eq!(s.requests, 10);
    assert_eq!(s.answered, 10);
    assert_eq!(s.wrong_answers, 0);
    assert_eq!(s.slashes, 0);
    assert_eq!(s.liveness_stalls, 0);
    assert!(s.passed);
    assert_eq!(s.aggregations.iter().sum::<u64>(), 10);
    assert_eq!(s.participations.iter().sum::<u64>(), 30);
    for i in 0..4 {
        let expected = s.initial_stakes[i]
            + DEFAULT_VAL_REWARD * u128::from(s.participations[i] as u32)
            + DEFAULT_AGG_REWARD * u128::from(s.aggregations[i] as u32);
        assert_eq!(s.balances[i], expected, "member {i}");
    }
}

#[test]
fn wrong_hash_voter_is_slashed_in_first_round() {
    let out = run_scenario(&quick("safety_n4_wrong_hash", 10)).unwrap();
    let s = &out.metrics.summary;
    assert_eq!(s.wrong_answers, 0);
    assert_eq!(s.answered, 10);
    assert!(s.passed);

    let first = &out.metrics.rows[0];
    assert_eq!(first.round, 1);
    assert_eq!(first.slashes, 1);

    let pos = out
        .log
        .events
        .iter()
        .position(|e| matches!(e.kind, EventKind::Slashed { val_index: 3, .. }))
        .unwrap();
    let EventKind::Slashed {
        request_id,
        agg_index,
        amount,
        ..
    } = out.log.events[pos].kind.clone()
    else {
        unreachable!()
    };
    assert_eq!(request_id, 0);
    let before = ContractState::replay(&EventLog {
        config: out.log.config.clone(),
        events: out.log.events[..pos].to_vec(),
    })
    .unwrap();
    let after = ContractState::replay(&EventLog {
        config: out.log.config.clone(),
        events: out.log.events[..=pos].to_vec(),
    })
    .unwrap();
    let bal = |st: &ContractState, i: u64| st.tree().account(i).unwrap().balance_units().unwrap();
    assert_eq!(amount, bal(&before, 3));
    assert_eq!(bal(&after, 3), 0);
    assert_eq!(bal(&after, agg_index), bal(&before, agg_index) + amount);
}

#[test]
fn offline_aggregator_is_skipped_after_timeout() {
    let out = run_scenario(&quick("liveness_offline_n4", 10)).unwrap();
    let s = &out.metrics.summary;
    let first = &out.metrics.rows[0];
    assert_eq!(first.aggregator, Some(1));
    assert!(first.latency().unwrap() >= 60);
    assert!(s.timeouts >= 1);
    assert_eq!(s.answered, 10);
    assert_eq!(s.liveness_stalls, 0);
    assert_eq!(s.aggregations[0], 0);
    assert!(s.passed);
}

#[test]
fn total_loss_forces_timeouts() {
    let mut c = quick("honest_n4", 2);
    c.drop_rate = 1.0;
    let out = run_scenario(&c).unwrap();
    let s = &out.metrics.summary;
    // Each member only reaches itself, so nobody gathers t votes.
    assert_eq!(s.answered, 0);
    assert!(s.timeouts >= 2);
    assert!(s.messages_dropped > 0);
    assert!(s.passed);
}

#[test]
fn attack_with_threshold_adversaries_breaks_safety() {
    let out = run_scenario(&bundled("attack_n4").unwrap()).unwrap();
    let s = &out.metrics.summary;
    assert!(s.wrong_answers >= 1);
    assert!(s.passed);
}

#[test]
fn corrupted_aggregator_forgery_is_rejected() {
    let out = run_scenario(&quick("safety_n4_duplicate_vote", 8)).unwrap();
    let s = &out.metrics.summary;
    assert!(s.rejected_submissions >= 1);
    assert_eq!(s.wrong_answers, 0);
    assert!(s.rejected_votes.get("duplicate").copied().unwrap_or(0) >= 1);
}

#[test]
fn randomized_selection_runs_green() {
    let out = run_scenario(&quick("honest_randomized_n4", 8)).unwrap();
    assert_eq!(out.metrics.summary.answered, 8);
    assert!(out.metrics.summary.passed);
}

#[test]
fn same_seed_same_bytes() {
    let c = quick("safety_n4_equivocate", 15);
    let a = run_scenario(&c).unwrap();
    let b = run_scenario(&c).unwrap();
    assert_eq!(a.metrics.to_csv(), b.metrics.to_csv());
    assert_eq!(a.metrics.summary_text(), b.metrics.summary_text());
    assert_eq!(a.log.to_string(), b.log.to_string());

    let mut other = c.clone();
    other.seed += 1;
    let d = run_scenario(&other).unwrap();
    assert_ne!(a.metrics.to_csv(), d.metrics.to_csv());
}

#[test]
fn produced_log_replays_to_final_root() {
    let out = run_scenario(&quick("safety_n4_zero_vote", 12)).unwrap();
    let text = out.log.to_string();
    let parsed: EventLog = text.parse().unwrap();
    let state = ContractState::replay(&parsed).unwrap();
    assert_eq!(state.state_root(), out.metrics.summary.final_root);
    state.audit().unwrap();
}

#[test]
fn invalid_config_is_rejected() {
    let c = ScenarioConfig {
        committee: 0,
        ..ScenarioConfig::default()
    };
    assert!(matches!(run_scenario(&c), Err(SimError::Config(_))));
}

#[test]
fn csv_has_one_row_per_request() {
    let mut c = quick("honest_n4", 3);
    c.requests_per_round = 2;
    let out = run_scenario(&c).unwrap();
    let csv = out.metrics.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 7);
    let cols = CSV_HEADER.split(',').count();
    assert!(lines.iter().all(|l| l.split(',').count() == cols));
    let summary = parse_summary(&out.metrics.summary_text());
    assert_eq!(summary["answered"], "6");
    assert_eq!(summary["verdict"], "pass");
}
