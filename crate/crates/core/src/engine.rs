//! Deterministic discrete-event kernel.
//!
//! Virtual time is kept in integer microseconds so event ordering is exact on
//! every platform. Events dequeue in `(fire_time, sequence)` order, where the
//! sequence is a per-scheduler insertion counter; equal-time events therefore
//! run FIFO.
//!
//! Random numbers come from [`RandomStream`]s derived from a master seed, a
//! purpose tag and an optional node scope. Each triple maps to its own ChaCha
//! stream, so draws in one subsystem never shift the draws of another.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a simulated node. The sink is always node 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const SINK: NodeId = NodeId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i as u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Virtual time (or a virtual duration) in microseconds.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000)
    }

    /// Rounds to the nearest microsecond. Negative and NaN inputs clamp to zero.
    pub fn from_secs_f64(s: f64) -> Self {
        if s.is_nan() || s <= 0.0 {
            return SimTime::ZERO;
        }
        SimTime((s * 1e6).round() as u64)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl Mul<u64> for SimTime {
    type Output = SimTime;
    fn mul(self, rhs: u64) -> SimTime {
        SimTime(self.0 * rhs)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}s", self.0 / 1_000_000, self.0 % 1_000_000)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("event scheduled at {at} but the clock is already at {now}")]
    ScheduleInPast { at: SimTime, now: SimTime },
    #[error("cannot run until {end}: the clock is already at {now}")]
    EndBeforeNow { end: SimTime, now: SimTime },
}

/// Handle returned by [`Scheduler::schedule`]; can be used to cancel the event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

impl EventHandle {
    pub fn sequence(self) -> u64 {
        self.0
    }
}

/// An event popped from the queue.
#[derive(Debug, Clone, PartialEq)]
pub struct Dispatched<E> {
    pub time: SimTime,
    pub sequence: u64,
    pub event: E,
}

struct Entry<E> {
    time: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // BinaryHeap is a max-heap; invert so the earliest (time, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Virtual clock plus ordered event queue.
pub struct Scheduler<E> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Entry<E>>,
    cancelled: HashSet<u64>,
    processed: u64,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            cancelled: HashSet::new(),
            processed: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of events dispatched so far.
    pub fn processed(&self) -> u64 {
        self.processed
    }

    /// Events still queued, including cancelled ones not yet discarded.
    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn schedule(&mut self, at: SimTime, event: E) -> Result<EventHandle, EngineError> {
        if at < self.now {
            return Err(EngineError::ScheduleInPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Entry {
            time: at,
            seq,
            event,
        });
        Ok(EventHandle(seq))
    }

    /// Schedules `delay` after the current clock. Cannot fail.
    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, event)
            .expect("relative schedule is never in the past")
    }

    /// Marks a pending event as cancelled. Returns false if the handle was
    /// already cancelled.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.cancelled.insert(handle.0)
    }

    /// Pops the next live event with `fire_time <= end`, advancing the clock.
    pub fn pop_until(&mut self, end: SimTime) -> Option<Dispatched<E>> {
        loop {
            let head = self.queue.peek()?;
            if head.time > end {
                return None;
            }
            let entry = self.queue.pop().expect("peeked");
            if self.cancelled.remove(&entry.seq) {
                continue;
            }
            debug_assert!(entry.time >= self.now);
            self.now = entry.time;
            self.processed += 1;
            return Some(Dispatched {
                time: entry.time,
                sequence: entry.seq,
                event: entry.event,
            });
        }
    }

    /// Dispatches every event with `fire_time <= end` to `handler`, then sets
    /// the clock to `end`. Handler errors abort the run and are returned.
    pub fn run_until<F, Err>(&mut self, end: SimTime, mut handler: F) -> Result<SimTime, Err>
    where
        F: FnMut(&mut Self, Dispatched<E>) -> Result<(), Err>,
        Err: From<EngineError>,
    {
        if end < self.now {
            return Err(EngineError::EndBeforeNow { end, now: self.now }.into());
        }
        while let Some(ev) = self.pop_until(end) {
            handler(self, ev)?;
        }
        self.now = end;
        Ok(self.now)
    }
}

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamPurpose {
    Topology,
    Traffic,
    Medium,
    ProtocolJitter,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::Topology => 1,
            StreamPurpose::Traffic => 2,
            StreamPurpose::Medium => 3,
            StreamPurpose::ProtocolJitter => 4,
        }
    }
}

/// A reproducible random stream keyed by `(master_seed, purpose, node_scope)`.
#[derive(Clone, Debug)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

/// Derives the stream for `(master_seed, purpose, node_scope)`.
///
/// The master seed keys the ChaCha cipher; purpose and scope select the
/// 64-bit ChaCha stream id, so distinct triples yield non-overlapping
/// keystreams.
pub fn derive_stream(
    master_seed: u64,
    purpose: StreamPurpose,
    node_scope: Option<NodeId>,
) -> RandomStream {
    let scope = node_scope.map_or(0, |n| u64::from(n.0) + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((purpose.tag() << 40) | scope);
    RandomStream { rng }
}

impl RandomStream {
    /// Uniform draw in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// True with probability `p`; `p >= 1` is always true, `p <= 0` never.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Uniform integer in `[lo, hi)`; returns `lo` when the range is empty.
    pub fn uniform_u64(&mut self, lo: u64, hi: u64) -> u64 {
        if hi <= lo {
            lo
        } else {
            self.rng.gen_range(lo..hi)
        }
    }

    /// Uniform time in `[lo, hi)`.
    pub fn uniform_time(&mut self, lo: SimTime, hi: SimTime) -> SimTime {
        SimTime::from_micros(self.uniform_u64(lo.as_micros(), hi.as_micros()))
    }

    /// Uniform real in `[lo, hi)`.
    pub fn uniform_f64(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}
