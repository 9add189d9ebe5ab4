//! Energy accounting and experiment metrics.
//!
//! Each node carries an [`EnergyLedger`] of time spent per radio and CPU
//! state. Radio time is split into TX and RX; the CPU is active whenever the
//! radio is on and sits in low-power mode otherwise, so CPU states partition
//! elapsed time exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{NodeId, SimTime};
use crate::scenario::{ConfigError, TrafficClassName};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TelemetryError {
    #[error("average power is undefined over zero elapsed time")]
    ZeroElapsed,
}

/// Current draw per state (milliamps) and supply voltage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub tx_ma: f64,
    pub rx_ma: f64,
    pub cpu_ma: f64,
    pub lpm_ma: f64,
    pub voltage: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            tx_ma: 17.4,
            rx_ma: 19.7,
            cpu_ma: 1.8,
            lpm_ma: 0.0545,
            voltage: 3.0,
        }
    }
}

impl EnergyConfig {
    pub(crate) fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("energy.tx_ma", self.tx_ma),
            ("energy.rx_ma", self.rx_ma),
            ("energy.cpu_ma", self.cpu_ma),
            ("energy.lpm_ma", self.lpm_ma),
            ("energy.voltage", self.voltage),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ConfigError::InvalidField {
                    field: name.into(),
                    reason: format!("{v} must be non-negative"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerState {
    Tx,
    Rx,
    Cpu,
    Lpm,
}

/// Time per state, in virtual microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub t_tx: SimTime,
    pub t_rx: SimTime,
    pub t_cpu_active: SimTime,
    pub t_lpm: SimTime,
}

impl EnergyLedger {
    pub fn charge(&mut self, state: PowerState, duration: SimTime) {
        let slot = match state {
            PowerState::Tx => &mut self.t_tx,
            PowerState::Rx => &mut self.t_rx,
            PowerState::Cpu => &mut self.t_cpu_active,
            PowerState::Lpm => &mut self.t_lpm,
        };
        *slot += duration;
    }

    /// Charges `secs` seconds. Negative durations are a contract violation.
    pub fn charge_secs(&mut self, state: PowerState, secs: f64) {
        assert!(secs >= 0.0, "negative charge of {secs} s");
        self.charge(state, SimTime::from_secs_f64(secs));
    }

    /// Energy in millijoules.
    pub fn energy_mj(&self, cfg: &EnergyConfig) -> f64 {
        (self.t_tx.as_secs_f64() * cfg.tx_ma
            + self.t_rx.as_secs_f64() * cfg.rx_ma
            + self.t_cpu_active.as_secs_f64() * cfg.cpu_ma
            + self.t_lpm.as_secs_f64() * cfg.lpm_ma)
            * cfg.voltage
    }
}

/// Average power in milliwatts over `elapsed`.
pub fn average_power(
    ledger: &EnergyLedger,
    elapsed: SimTime,
    cfg: &EnergyConfig,
) -> Result<f64, TelemetryError> {
    if elapsed == SimTime::ZERO {
        return Err(TelemetryError::ZeroElapsed);
    }
    Ok(ledger.energy_mj(cfg) / elapsed.as_secs_f64())
}

/// Online radio accounting for one node.
///
/// Every on-interval (TX or RX) is opened at the current accounting point,
/// so all open intervals share a common start and their union is simply
/// `[last, max end)`. TX takes precedence over RX where they overlap.
#[derive(Debug, Clone, Default)]
pub struct RadioMeter {
    last: SimTime,
    tx_until: SimTime,
    rx_until: SimTime,
    ledger: EnergyLedger,
}

impl RadioMeter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Accounts all time up to `now`.
    pub fn advance(&mut self, now: SimTime) {
        if now <= self.last {
            return;
        }
        let span = now - self.last;
        let tx_end = self.tx_until.clamp(self.last, now);
        let on_end = self.tx_until.max(self.rx_until).clamp(self.last, now);
        let tx = tx_end - self.last;
        let on = on_end - self.last;
        let rx = on - tx;
        self.ledger.charge(PowerState::Tx, tx);
        self.ledger.charge(PowerState::Rx, rx);
        self.ledger.charge(PowerState::Cpu, on);
        self.ledger.charge(PowerState::Lpm, span - on);
        self.last = now;
    }

    pub fn transmit(&mut self, start: SimTime, end: SimTime) {
        self.advance(start);
        self.tx_until = self.tx_until.max(end);
    }

    pub fn listen(&mut self, start: SimTime, end: SimTime) {
        self.advance(start);
        self.rx_until = self.rx_until.max(end);
    }

    /// Ledger as of `at`, without disturbing the meter.
    pub fn snapshot(&self, at: SimTime) -> EnergyLedger {
        let mut copy = self.clone();
        copy.advance(at);
        copy.ledger
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropCause {
    NoRoute,
    MacFailure,
    QueueOverflow,
    Ttl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PacketOutcome {
    Delivered,
    Dropped(DropCause),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounts {
    pub no_route: u64,
    pub mac_failure: u64,
    pub queue_overflow: u64,
    pub ttl: u64,
}

impl DropCounts {
    pub fn total(&self) -> u64 {
        self.no_route + self.mac_failure + self.queue_overflow + self.ttl
    }

    fn bump(&mut self, cause: DropCause) {
        match cause {
            DropCause::NoRoute => self.no_route += 1,
            DropCause::MacFailure => self.mac_failure += 1,
            DropCause::QueueOverflow => self.queue_overflow += 1,
            DropCause::Ttl => self.ttl += 1,
        }
    }

    fn add(&mut self, other: &DropCounts) {
        self.no_route += other.no_route;
        self.mac_failure += other.mac_failure;
        self.queue_overflow += other.queue_overflow;
        self.ttl += other.ttl;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassCounters {
    pub sent: u64,
    pub delivered: u64,
    pub drops: DropCounts,
    pub hop_sum: u64,
    pub latency_sum: SimTime,
}

impl ClassCounters {
    /// `None` when nothing was sent.
    pub fn pdr(&self) -> Option<f64> {
        (self.sent > 0).then(|| self.delivered as f64 / self.sent as f64)
    }
}

/// Per-run results.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classes: [ClassCounters; 4],
    pub convergence_time: Option<SimTime>,
    pub dio_count: u64,
    pub dis_count: u64,
    /// Average power per sensor, indexed by node id (sink entry is its own).
    pub node_power_mw: Vec<f64>,
    /// Mean over sensors.
    pub avg_power_mw: f64,
    /// Sum over sensors.
    pub total_energy_mj: f64,
}

impl MetricsReport {
    pub fn record_packet(
        &mut self,
        class: TrafficClassName,
        outcome: PacketOutcome,
        hops: u8,
        latency: SimTime,
    ) {
        let c = &mut self.classes[class.index()];
        c.sent += 1;
        match outcome {
            PacketOutcome::Delivered => {
                c.delivered += 1;
                c.hop_sum += u64::from(hops);
                c.latency_sum += latency;
            }
            PacketOutcome::Dropped(cause) => c.drops.bump(cause),
        }
    }

    pub fn class(&self, class: TrafficClassName) -> &ClassCounters {
        &self.classes[class.index()]
    }

    pub fn total(&self) -> ClassCounters {
        let mut t = ClassCounters::default();
        for c in &self.classes {
            t.sent += c.sent;
            t.delivered += c.delivered;
            t.drops.add(&c.drops);
            t.hop_sum += c.hop_sum;
            t.latency_sum += c.latency_sum;
        }
        t
    }

    pub fn pdr_total(&self) -> Option<f64> {
        self.total().pdr()
    }

    pub fn pdr(&self, class: TrafficClassName) -> Option<f64> {
        self.class(class).pdr()
    }
}

/// Earliest time at which every sensor is joined, from a time-ordered stream
/// of `(time, node, joined)` route events. `None` if never reached.
pub fn convergence_time(
    events: impl IntoIterator<Item = (SimTime, NodeId, bool)>,
    sensor_count: usize,
) -> Option<SimTime> {
    let mut joined = std::collections::BTreeSet::new();
    for (t, node, is_joined) in events {
        if is_joined {
            joined.insert(node);
        } else {
            joined.remove(&node);
        }
        if joined.len() == sensor_count {
            return Some(t);
        }
    }
    None
}
