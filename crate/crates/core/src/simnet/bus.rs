use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Uniform integer delay in `[min, max]` sim-seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySpec {
    pub min: u64,
    pub max: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BusPolicy {
    pub delay: DelaySpec,
    pub drop_rate: f64,
}

/// Seeded point-to-point delivery scheduler. Each message gets
/// `send time + delay` unless dropped; delivery times on one directed pair
/// never decrease, so per-pair FIFO order holds.
#[derive(Debug, Clone)]
pub struct Bus {
    policy: BusPolicy,
    rng: ChaCha8Rng,
    last: BTreeMap<(usize, usize), u64>,
    sent: u64,
    dropped: u64,
}

impl Bus {
    pub fn new(policy: BusPolicy, rng: ChaCha8Rng) -> Self {
        Bus {
            policy,
            rng,
            last: BTreeMap::new(),
            sent: 0,
            dropped: 0,
        }
    }

    /// Delivery time for a message `from → to` sent at `now`, or `None` if
    /// the message is lost. Local delivery is immediate and reliable.
    pub fn schedule(&mut self, from: usize, to: usize, now: u64) -> Option<u64> {
        self.sent += 1;
        if from == to {
            return Some(now);
        }
        // Always draw both numbers so the stream does not depend on outcomes.
        let lost = self.rng.gen::<f64>() < self.policy.drop_rate;
        let DelaySpec { min, max } = self.policy.delay;
        let delay = self.rng.gen_range(min..=max.max(min));
        if lost {
            self.dropped += 1;
            return None;
        }
        let slot = self.last.entry((from, to)).or_insert(0);
        let at = (now + delay).max(*slot);
        *slot = at;
        Some(at)
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}

/// Schedules a batch of `(from, to, send time)` messages in order.
pub fn bus_deliver(bus: &mut Bus, messages: &[(usize, usize, u64)]) -> Vec<Option<u64>> {
    messages
        .iter()
        .map(|&(f, t, now)| bus.schedule(f, t, now))
        .collect()
}
