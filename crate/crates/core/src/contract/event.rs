//! Contract events and the line-oriented log format.
//!
//! ```text
//! config depth=2 min_stake=100 ...
//! 0 0 Registered index=0 owner=1 pkx=... pky=... stake=100 ip=10.0.0.1
//! 1 0 BlockRequested request=0 client=9 block=120 fee=80
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::circuits::ValidatorBits;
use crate::crypto::{CurvePoint, FieldElement};

use super::{Address, ContractConfig, ContractError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub seq: u64,
    pub time: u64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    Registered {
        index: u64,
        owner: Address,
        pubkey: CurvePoint,
        ip: String,
        stake: u128,
    },
    Replaced {
        index: u64,
        owner: Address,
        pubkey: CurvePoint,
        ip: String,
        stake: u128,
        displaced_owner: Address,
        displaced_balance: u128,
    },
    Exited {
        index: u64,
        exit_time: u64,
    },
    Withdrawn {
        index: u64,
        owner: Address,
        amount: u128,
    },
    BlockRequested {
        request_id: u64,
        client: Address,
        block_number: u64,
        fee: u128,
    },
    BlockSubmitted {
        request_id: u64,
        aggregator: u64,
        block_hash: FieldElement,
        validator_bits: ValidatorBits,
        post_state_root: FieldElement,
        next_seed: Option<CurvePoint>,
    },
    Slashed {
        request_id: u64,
        agg_index: u64,
        val_index: u64,
        amount: u128,
        post_state_root: FieldElement,
    },
    /// The aggregator let a pending request pass its deadline; the turn moves on.
    AggregatorTimedOut {
        aggregator: u64,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Registered { .. } => "Registered",
            EventKind::Replaced { .. } => "Replaced",
            EventKind::Exited { .. } => "Exited",
            EventKind::Withdrawn { .. } => "Withdrawn",
            EventKind::BlockRequested { .. } => "BlockRequested",
            EventKind::BlockSubmitted { .. } => "BlockSubmitted",
            EventKind::Slashed { .. } => "Slashed",
            EventKind::AggregatorTimedOut { .. } => "AggregatorTimedOut",
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.seq, self.time, self.kind.name())?;
        match &self.kind {
            EventKind::Registered { index, owner, pubkey, ip, stake } => write!(
                f,
                " index={index} owner={owner} pkx={} pky={} stake={stake} ip={ip}",
                pubkey.x, pubkey.y
            ),
            EventKind::Replaced {
                index,
                owner,
                pubkey,
                ip,
                stake,
                displaced_owner,
                displaced_balance,
            } => write!(
                f,
                " index={index} owner={owner} pkx={} pky={} stake={stake} ip={ip} \
                 displaced_owner={displaced_owner} displaced_balance={displaced_balance}",
                pubkey.x, pubkey.y
            ),
            EventKind::Exited { index, exit_time } => write!(f, " index={index} exit_time={exit_time}"),
            EventKind::Withdrawn { index, owner, amount } => {
                write!(f, " index={index} owner={owner} amount={amount}")
            }
            EventKind::BlockRequested {
                request_id,
                client,
                block_number,
                fee,
            } => write!(f, " request={request_id} client={client} block={block_number} fee={fee}"),
            EventKind::BlockSubmitted {
                request_id,
                aggregator,
                block_hash,
                validator_bits,
                post_state_root,
                next_seed,
            } => {
                write!(
                    f,
                    " request={request_id} aggregator={aggregator} hash={block_hash} \
                     bits={validator_bits} post_root={post_state_root}"
                )?;
                if let Some(s) = next_seed {
                    write!(f, " seedx={} seedy={}", s.x, s.y)?;
                }
                Ok(())
            }
            EventKind::Slashed {
                request_id,
                agg_index,
                val_index,
                amount,
                post_state_root,
            } => write!(
                f,
                " request={request_id} aggregator={agg_index} validator={val_index} amount={amount} \
                 post_root={post_state_root}"
            ),
            EventKind::AggregatorTimedOut { aggregator } => write!(f, " aggregator={aggregator}"),
        }
    }
}

fn corrupt(msg: impl Into<String>) -> ContractError {
    ContractError::CorruptLog(msg.into())
}

/// `key=value` fields of one record; every field must be consumed exactly once.
pub(crate) struct Fields<'a> {
    map: BTreeMap<&'a str, &'a str>,
}

impl<'a> Fields<'a> {
    pub(crate) fn parse<I: Iterator<Item = &'a str>>(tokens: I) -> Result<Self, ContractError> {
        let mut map = BTreeMap::new();
        for tok in tokens {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| corrupt(format!("expected key=value, got {tok:?}")))?;
            if map.insert(k, v).is_some() {
                return Err(corrupt(format!("duplicate field {k:?}")));
            }
        }
        Ok(Fields { map })
    }

    pub(crate) fn take<T: FromStr>(&mut self, key: &str) -> Result<T, ContractError> {
        let raw = self
            .map
            .remove(key)
            .ok_or_else(|| corrupt(format!("missing field {key:?}")))?;
        raw.parse()
            .map_err(|_| corrupt(format!("bad value for {key:?}: {raw:?}")))
    }

    pub(crate) fn take_opt<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ContractError> {
        if self.map.contains_key(key) {
            self.take(key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub(crate) fn finish(self) -> Result<(), ContractError> {
        match self.map.keys().next() {
            None => Ok(()),
            Some(k) => Err(corrupt(format!("unexpected field {k:?}"))),
        }
    }
}

impl FromStr for Event {
    type Err = ContractError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let mut tokens = line.split_whitespace();
        let mut next = |what: &str| {
            tokens
                .next()
                .ok_or_else(|| corrupt(format!("record missing {what}")))
        };
        let seq = next("seq")?.parse().map_err(|_| corrupt("bad seq"))?;
        let time = next("time")?.parse().map_err(|_| corrupt("bad time"))?;
        let name = next("kind")?;
        let mut f = Fields::parse(tokens)?;
        let point = |f: &mut Fields, x: &str, y: &str| -> Result<CurvePoint, ContractError> {
            Ok(CurvePoint {
                x: f.take(x)?,
                y: f.take(y)?,
            })
        };
        let kind = match name {
            "Registered" => EventKind::Registered {
                index: f.take("index")?,
                owner: f.take("owner")?,
                pubkey: point(&mut f, "pkx", "pky")?,
                stake: f.take("stake")?,
                ip: f.take("ip")?,
            },
            "Replaced" => EventKind::Replaced {
                index: f.take("index")?,
                owner: f.take("owner")?,
                pubkey: point(&mut f, "pkx", "pky")?,
                stake: f.take("stake")?,
                ip: f.take("ip")?,
                displaced_owner: f.take("displaced_owner")?,
                displaced_balance: f.take("displaced_balance")?,
            },
            "Exited" => EventKind::Exited {
                index: f.take("index")?,
                exit_time: f.take("exit_time")?,
            },
            "Withdrawn" => EventKind::Withdrawn {
                index: f.take("index")?,
                owner: f.take("owner")?,
                amount: f.take("amount")?,
            },
            "BlockRequested" => EventKind::BlockRequested {
                request_id: f.take("request")?,
                client: f.take("client")?,
                block_number: f.take("block")?,
                fee: f.take("fee")?,
            },
            "BlockSubmitted" => {
                let request_id = f.take("request")?;
                let aggregator = f.take("aggregator")?;
                let block_hash = f.take("hash")?;
                let validator_bits = f.take("bits")?;
                let post_state_root = f.take("post_root")?;
                let next_seed = match (f.take_opt("seedx")?, f.take_opt("seedy")?) {
                    (Some(x), Some(y)) => Some(CurvePoint { x, y }),
                    (None, None) => None,
                    _ => return Err(corrupt("half a seed")),
                };
                EventKind::BlockSubmitted {
                    request_id,
                    aggregator,
                    block_hash,
                    validator_bits,
                    post_state_root,
                    next_seed,
                }
            }
            "Slashed" => EventKind::Slashed {
                request_id: f.take("request")?,
                agg_index: f.take("aggregator")?,
                val_index: f.take("validator")?,
                amount: f.take("amount")?,
                post_state_root: f.take("post_root")?,
            },
            "AggregatorTimedOut" => EventKind::AggregatorTimedOut {
                aggregator: f.take("aggregator")?,
            },
            other => return Err(corrupt(format!("unknown event kind {other:?}"))),
        };
        f.finish()?;
        Ok(Event { seq, time, kind })
    }
}

/// A configuration header followed by events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventLog {
    pub config: ContractConfig,
    pub events: Vec<Event>,
}

impl fmt::Display for EventLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.config)?;
        for e in &self.events {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

impl FromStr for EventLog {
    type Err = ContractError;

    /// Blank lines and `#` comments are ignored. A file without a config
    /// header (including an empty file) uses the default configuration.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut config = None;
        let mut events = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = |e: ContractError| match e {
                ContractError::CorruptLog(m) | ContractError::Config(m) => {
                    ContractError::CorruptLog(format!("line {}: {m}", n + 1))
                }
                other => other,
            };
            if line.starts_with("config") {
                if config.is_some() || !events.is_empty() {
                    return Err(corrupt(format!("line {}: misplaced config header", n + 1)));
                }
                config = Some(line.parse::<ContractConfig>().map_err(at)?);
            } else {
                events.push(line.parse::<Event>().map_err(at)?);
            }
        }
        Ok(EventLog {
            config: config.unwrap_or_default(),
            events,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::keygen;

    fn samples() -> Vec<EventKind> {
        let pk = keygen(&[1; 32]).public;
        vec![
            EventKind::Registered {
                index: 0,
                owner: Address(7),
                pubkey: pk,
                ip: "10.0.0.1:9000".into(),
                stake: 100,
            },
            EventKind::Replaced {
                index: 3,
                owner: Address(8),
                pubkey: pk,
                ip: "n8".into(),
                stake: 101,
                displaced_owner: Address(2),
                displaced_balance: 100,
            },
            EventKind::Exited {
                index: 1,
                exit_time: 604800,
            },
            EventKind::Withdrawn {
                index: 1,
                owner: Address(1),
                amount: 150,
            },
            EventKind::BlockRequested {
                request_id: 4,
                client: Address(99),
                block_number: 1234,
                fee: 80,
            },
            EventKind::BlockSubmitted {
                request_id: 4,
                aggregator: 2,
                block_hash: FieldElement::from_u64(55),
                validator_bits: ValidatorBits::from_indices([0, 1, 3]),
                post_state_root: FieldElement::from_u64(66),
                next_seed: Some(pk),
            },
            EventKind::BlockSubmitted {
                request_id: 5,
                aggregator: 0,
                block_hash: FieldElement::zero(),
                validator_bits: ValidatorBits::from_indices([1]),
                post_state_root: FieldElement::from_u64(1),
                next_seed: None,
            },
            EventKind::Slashed {
                request_id: 4,
                agg_index: 2,
                val_index: 1,
                amount: 160,
                post_state_root: FieldElement::from_u64(77),
            },
            EventKind::AggregatorTimedOut { aggregator: 3 },
        ]
    }

    #[test]
    fn every_kind_round_trips() {
        for (i, kind) in samples().into_iter().enumerate() {
            let e = Event {
                seq: i as u64,
                time: 10 * i as u64,
                kind,
            };
            let line = e.to_string();
            assert_eq!(line.parse::<Event>().unwrap(), e, "{line}");
        }
    }

    #[test]
    fn log_round_trips() {
        let log = EventLog {
            config: ContractConfig::new(3),
            events: samples()
                .into_iter()
                .enumerate()
                .map(|(i, kind)| Event {
                    seq: i as u64,
                    time: 0,
                    kind,
                })
                .collect(),
        };
        assert_eq!(log.to_string().parse::<EventLog>().unwrap(), log);
    }

    #[test]
    fn rejects_garbage() {
        for bad in [
            "0 0 Exited index=1",
            "0 0 Exited index=1 exit_time=5 extra=1",
            "0 0 Exited index=1 index=2 exit_time=5",
            "0 0 Teleported index=1",
            "x 0 Exited index=1 exit_time=5",
            "0 0 Exited index=one exit_time=5",
            "0 0",
        ] {
            assert!(
                matches!(bad.parse::<Event>(), Err(ContractError::CorruptLog(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn empty_text_is_default_genesis() {
        let log: EventLog = "".parse().unwrap();
        assert_eq!(log.config, ContractConfig::default());
        assert!(log.events.is_empty());
    }
}
