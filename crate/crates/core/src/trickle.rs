//! Trickle timer (RFC 6206) driving DIO emission.

use serde::{Deserialize, Serialize};

use crate::engine::{RandomStream, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrickleConfig {
    pub i_min: SimTime,
    pub doublings: u32,
    pub redundancy_k: u32,
}

impl Default for TrickleConfig {
    fn default() -> Self {
        TrickleConfig {
            i_min: SimTime::from_micros(4_096_000),
            doublings: 8,
            redundancy_k: 10,
        }
    }
}

impl TrickleConfig {
    pub fn i_max(&self) -> SimTime {
        self.i_min * (1u64 << self.doublings)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrickleState {
    cfg: TrickleConfig,
    interval: SimTime,
    /// Fire point, as an offset into the current interval.
    t: SimTime,
    counter: u32,
    interval_start: SimTime,
}

impl TrickleState {
    pub fn new(cfg: TrickleConfig) -> Self {
        TrickleState {
            cfg,
            interval: cfg.i_min,
            t: cfg.i_min,
            counter: 0,
            interval_start: SimTime::ZERO,
        }
    }

    pub fn config(&self) -> &TrickleConfig {
        &self.cfg
    }

    pub fn interval(&self) -> SimTime {
        self.interval
    }

    pub fn fire_offset(&self) -> SimTime {
        self.t
    }

    pub fn counter(&self) -> u32 {
        self.counter
    }

    /// Absolute time of the fire point in the current interval.
    pub fn fire_at(&self) -> SimTime {
        self.interval_start + self.t
    }

    /// Absolute end of the current interval.
    pub fn interval_end(&self) -> SimTime {
        self.interval_start + self.interval
    }

    /// Inconsistency: back to `i_min`, counter cleared, new fire point.
    pub fn reset(&mut self, now: SimTime, rng: &mut RandomStream) {
        self.interval = self.cfg.i_min;
        self.begin_interval(now, rng);
    }

    /// Interval expired: double (capped) and start the next one.
    pub fn next_interval(&mut self, now: SimTime, rng: &mut RandomStream) {
        let doubled = self.interval * 2;
        self.interval = doubled.min(self.cfg.i_max());
        self.begin_interval(now, rng);
    }

    fn begin_interval(&mut self, now: SimTime, rng: &mut RandomStream) {
        self.counter = 0;
        self.interval_start = now;
        let half = SimTime::from_micros(self.interval.as_micros() / 2);
        self.t = rng.uniform_time(half, self.interval);
    }

    pub fn hear_consistent(&mut self) {
        self.counter = self.counter.saturating_add(1);
    }

    /// Whether the fire point should transmit (counter below k).
    pub fn should_transmit(&self) -> bool {
        self.counter < self.cfg.redundancy_k
    }
}
