use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use zkoracle_core::audit::{self, ScalingRow};
use zkoracle_core::simnet::{run_scenario, ScenarioConfig, SimError, BUNDLED};
use zkoracle_core::{ContractState, EventLog};

/// Scenario runner, event-log auditor and circuit scaling report.
#[derive(Parser, Debug)]
#[command(name = "zkoracle", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write metrics.csv, summary.txt and events.log.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Constraint counts and witness sizes for committee sizes (powers of two, at most 256).
    Scaling {
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild contract state from an event log and audit it.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
    /// Run every bundled scenario and the circuit and conservation suites.
    Selftest,
}

const OK: u8 = 0;
const FAILED: u8 = 1;
const USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, seed, out } => cmd_run(&config, seed, &out),
        Command::Scaling { sizes, out } => cmd_scaling(&sizes, &out),
        Command::Replay { log } => cmd_replay(&log),
        Command::Selftest => cmd_selftest(),
    };
    ExitCode::from(code)
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn cmd_run(config: &Path, seed: u64, out: &Path) -> u8 {
    let text = match fs::read_to_string(config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return USAGE;
        }
    };
    let mut cfg = match ScenarioConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return USAGE;
        }
    };
    cfg.seed = seed;
    let outcome = match run_scenario(&cfg) {
        Ok(o) => o,
        Err(e @ SimError::Config(_)) => {
            eprintln!("error: {e}");
            return USAGE;
        }
        Err(e) => {
            eprintln!("error: scenario aborted: {e}");
            return FAILED;
        }
    };
    let summary = outcome.metrics.summary_text();
    let written = fs::create_dir_all(out)
        .and_then(|_| write_atomic(&out.join("metrics.csv"), &outcome.metrics.to_csv()))
        .and_then(|_| write_atomic(&out.join("summary.txt"), &summary))
        .and_then(|_| write_atomic(&out.join("events.log"), &outcome.log.to_string()));
    if let Err(e) = written {
        eprintln!("error: writing to {}: {e}", out.display());
        return FAILED;
    }
    print!("{summary}");
    if outcome.metrics.summary.passed {
        OK
    } else {
        eprintln!("scenario assertions failed");
        FAILED
    }
}

fn cmd_scaling(sizes: &[u64], out: &Path) -> u8 {
    if let Some(bad) = sizes
        .iter()
        .find(|&&s| !s.is_power_of_two() || !(2..=256).contains(&s))
    {
        eprintln!("error: size {bad} is not a power of two between 2 and 256");
        return USAGE;
    }
    let mut rows: Vec<ScalingRow> = Vec::new();
    for &size in sizes {
        match audit::scaling_row(size) {
            Ok(r) => rows.push(r),
            Err(e) => {
                eprintln!("error: {e}");
                return FAILED;
            }
        }
    }
    let csv = audit::scaling_csv(&rows);
    if let Err(e) = write_atomic(out, &csv) {
        eprintln!("error: writing {}: {e}", out.display());
        return FAILED;
    }
    print!("{csv}");
    OK
}

fn cmd_replay(path: &Path) -> u8 {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return USAGE;
        }
    };
    let state = match text
        .parse::<EventLog>()
        .and_then(|log| ContractState::replay(&log))
    {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return FAILED;
        }
    };
    print_report(&state);
    match state.audit() {
        Ok(()) => {
            println!("audit=ok");
            OK
        }
        Err(e) => {
            println!("audit=failed");
            eprintln!("error: {e}");
            FAILED
        }
    }
}

fn print_report(state: &ContractState) {
    let ledger = state.ledger();
    println!("events={}", state.log().len());
    println!("time={}", state.now());
    println!("final_root={}", state.state_root());
    println!("members={}", state.tree().occupied().count());
    for account in state.tree().occupied() {
        let i = account.index;
        let owner = state.owner_of(i).map(|a| a.to_string()).unwrap_or_default();
        let exit = state
            .exit_time_of(i)
            .map(|t| t.to_string())
            .unwrap_or_else(|| "-".into());
        println!(
            "member.{i} owner={owner} balance={} exit_time={exit}",
            account.balance
        );
    }
    println!("total_balance={}", state.total_balance());
    println!("deposited={}", ledger.deposited);
    println!("withdrawn={}", ledger.withdrawn);
    println!("displaced_returned={}", ledger.displaced_returned);
    println!("rewards_credited={}", ledger.rewards_credited);
    println!("fees_received={}", ledger.fees_received);
    println!("slashed={}", ledger.slashed);
    println!("escrow={}", state.escrow());
    println!("requests={}", state.requests().count());
    println!("pending={}", state.pending().count());
    println!("timeouts={}", state.timeouts());
}

fn line(ok: bool, name: &str, detail: String) -> bool {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn cmd_selftest() -> u8 {
    let mut all = true;
    for (name, text) in BUNDLED {
        let started = Instant::now();
        let result = ScenarioConfig::from_json(text)
            .map_err(|e| e.to_string())
            .and_then(|cfg| {
                let out = run_scenario(&cfg).map_err(|e| e.to_string())?;
                let replayed = ContractState::replay(&out.log).map_err(|e| e.to_string())?;
                if replayed.state_root() != out.metrics.summary.final_root {
                    return Err("replayed root differs".into());
                }
                Ok(out.metrics.summary)
            });
        all &= match result {
            Ok(s) => line(
                s.passed,
                &format!("scenario {name}"),
                format!(
                    "answered {}/{} wrong {} stalls {} slashes {} timeouts {} ({:.1}s)",
                    s.answered,
                    s.requests,
                    s.wrong_answers,
                    s.liveness_stalls,
                    s.slashes,
                    s.timeouts,
                    started.elapsed().as_secs_f64()
                ),
            ),
            Err(e) => line(false, &format!("scenario {name}"), e),
        };
    }

    let started = Instant::now();
    let bf = audit::brute_force_aggregation();
    all &= line(
        bf.ok(),
        "circuit brute force",
        format!(
            "{} assignments, {} packagings, {} accepted, {} false accepts, {} false rejects ({:.1}s)",
            bf.assignments,
            bf.packagings,
            bf.accepted,
            bf.false_accepts,
            bf.false_rejects,
            started.elapsed().as_secs_f64()
        ),
    );

    let started = Instant::now();
    let oracle = audit::state_transition_oracle(60, 30, 7);
    all &= line(
        oracle.ok(),
        "state transition oracle",
        format!(
            "{} aggregations, {} slashes, {} mismatches ({:.1}s)",
            oracle.aggregations,
            oracle.slashes,
            oracle.mismatches.len(),
            started.elapsed().as_secs_f64()
        ),
    );

    let started = Instant::now();
    let cons = audit::conservation_suite(20, 60, 11);
    all &= line(
        cons.ok(),
        "conservation",
        format!(
            "{} scenarios, {} transactions, {} slashes, {} violations ({:.1}s)",
            cons.scenarios,
            cons.transactions,
            cons.slashes,
            cons.violations.len(),
            started.elapsed().as_secs_f64()
        ),
    );
    for v in oracle.mismatches.iter().chain(&cons.violations).take(10) {
        eprintln!("  {v}");
    }

    if all {
        OK
    } else {
        FAILED
    }
}
