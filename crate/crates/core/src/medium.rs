//! Unit-disk radio medium with probabilistic reception.
//!
//! A node hears another iff their Euclidean distance is at most `tx_range`
//! (closed boundary). Inside the disk, every reception independently succeeds
//! with the link's RX success ratio. Any other transmission audible at a
//! receiver that overlaps a frame destroys it there; there is no capture
//! effect.

use serde::{Deserialize, Serialize};

use crate::engine::{NodeId, RandomStream, SimTime};

/// Planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance_sq(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(&self, other: &Position) -> f64 {
        self.distance_sq(other).sqrt()
    }
}

/// RX ratio override for one undirected link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkOverride {
    pub a: NodeId,
    pub b: NodeId,
    pub rx_success_ratio: f64,
}

/// Radio and MAC parameters. Durations are in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediumConfig {
    /// Meters.
    pub tx_range: f64,
    /// Default per-reception success probability. Set from the scenario.
    #[serde(skip)]
    pub rx_success_ratio: f64,
    /// Bits per second.
    pub bitrate: u64,
    /// Data frame attempts including the first one.
    pub max_transmissions: u8,
    pub ack_timeout: f64,
    /// Width of the uniform backoff drawn before every attempt.
    pub backoff_window: f64,
    /// Busy CCAs tolerated per attempt before the attempt is abandoned.
    pub max_cca_attempts: u8,
    pub cca_duration: f64,
    /// Delay between receiving a data frame and starting its ACK.
    pub turnaround: f64,
    pub control_frame_bytes: u32,
    pub data_payload_bytes: u32,
    pub data_header_bytes: u32,
    pub ack_frame_bytes: u32,
    pub link_overrides: Vec<LinkOverride>,
}

impl Default for MediumConfig {
    fn default() -> Self {
        MediumConfig {
            tx_range: 100.0,
            rx_success_ratio: 1.0,
            bitrate: 250_000,
            max_transmissions: 4,
            ack_timeout: 0.001,
            backoff_window: 0.5,
            max_cca_attempts: 5,
            cca_duration: 0.000_128,
            turnaround: 0.000_192,
            control_frame_bytes: 64,
            data_payload_bytes: 30,
            data_header_bytes: 20,
            ack_frame_bytes: 11,
            link_overrides: Vec::new(),
        }
    }
}

impl MediumConfig {
    /// Returns the name and reason of the first invalid field.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let ratio_ok = |r: f64| (0.0..=1.0).contains(&r);
        if !ratio_ok(self.rx_success_ratio) {
            return Err((
                "rx_success_ratio",
                format!("{} is outside [0, 1]", self.rx_success_ratio),
            ));
        }
        if !(self.tx_range > 0.0 && self.tx_range.is_finite()) {
            return Err(("tx_range", format!("{} must be positive", self.tx_range)));
        }
        if self.bitrate == 0 {
            return Err(("bitrate", "must be positive".into()));
        }
        if self.max_transmissions == 0 {
            return Err(("max_transmissions", "must be at least 1".into()));
        }
        if self.max_cca_attempts == 0 {
            return Err(("max_cca_attempts", "must be at least 1".into()));
        }
        for (name, v) in [
            ("ack_timeout", self.ack_timeout),
            ("backoff_window", self.backoff_window),
            ("cca_duration", self.cca_duration),
            ("turnaround", self.turnaround),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err((name, format!("{v} must be a non-negative duration")));
            }
        }
        if self.ack_timeout < self.turnaround {
            return Err(("ack_timeout", "shorter than the ACK turnaround".into()));
        }
        if self.control_frame_bytes == 0
            || self.data_payload_bytes + self.data_header_bytes == 0
            || self.ack_frame_bytes == 0
        {
            return Err(("frame sizes", "frames must be non-empty".into()));
        }
        for o in &self.link_overrides {
            if !ratio_ok(o.rx_success_ratio) {
                return Err((
                    "link_overrides.rx_success_ratio",
                    format!("{} is outside [0, 1]", o.rx_success_ratio),
                ));
            }
        }
        Ok(())
    }

    /// Air time of a frame of `bytes`, rounded up to the microsecond.
    pub fn airtime(&self, bytes: u32) -> SimTime {
        let bits = u64::from(bytes) * 8;
        SimTime::from_micros((bits * 1_000_000).div_ceil(self.bitrate))
    }

    pub fn data_frame_bytes(&self) -> u32 {
        self.data_payload_bytes + self.data_header_bytes
    }
}

/// Closed unit-disk test: true iff the distance is at most `tx_range`.
pub fn in_range(a: &Position, b: &Position, cfg: &MediumConfig) -> bool {
    a.distance_sq(b) <= cfg.tx_range * cfg.tx_range
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RxOutcome {
    Delivered,
    LostRandom,
    LostCollision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TxId(pub u64);

/// One frame on the air.
#[derive(Debug, Clone)]
pub struct Transmission<P> {
    pub id: TxId,
    pub sender: NodeId,
    /// `None` for broadcast.
    pub dest: Option<NodeId>,
    pub start: SimTime,
    pub end: SimTime,
    /// Nodes the frame is addressed to (every in-range node for broadcast).
    pub receivers: Vec<NodeId>,
    /// Parallel to `receivers`: frame destroyed at that receiver.
    corrupted: Vec<bool>,
    /// Link RX ratio towards each receiver, parallel to `receivers`.
    ratios: Vec<f64>,
    pub payload: P,
}

impl<P> Transmission<P> {
    pub fn is_corrupted_at(&self, node: NodeId) -> bool {
        self.receivers
            .iter()
            .position(|&r| r == node)
            .is_some_and(|i| self.corrupted[i])
    }

    fn mark_corrupted(&mut self, idx: usize) {
        self.corrupted[idx] = true;
    }
}

/// Outcome of [`deliver`] for one receiver of a finished transmission.
///
/// Exactly one draw is taken from `stream` per call, whatever the outcome, so
/// the draw sequence of a receiver does not depend on collisions.
pub fn deliver<P>(tx: &Transmission<P>, receiver: NodeId, stream: &mut RandomStream) -> RxOutcome {
    let idx = tx
        .receivers
        .iter()
        .position(|&r| r == receiver)
        .expect("receiver must be addressed by the transmission");
    let success = stream.bernoulli(tx.ratios[idx]);
    if tx.corrupted[idx] {
        RxOutcome::LostCollision
    } else if success {
        RxOutcome::Delivered
    } else {
        RxOutcome::LostRandom
    }
}

/// Shared channel: static neighbor tables plus transmissions in flight.
pub struct Medium<P> {
    cfg: MediumConfig,
    n: usize,
    audible: Vec<bool>,
    ratio: Vec<f64>,
    neighbors: Vec<Vec<NodeId>>,
    active: Vec<Transmission<P>>,
    next_id: u64,
}

impl<P> Medium<P> {
    pub fn new(cfg: MediumConfig, positions: &[Position]) -> Self {
        let n = positions.len();
        let mut audible = vec![false; n * n];
        let mut ratio = vec![cfg.rx_success_ratio; n * n];
        let mut neighbors = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                if i != j && in_range(&positions[i], &positions[j], &cfg) {
                    audible[i * n + j] = true;
                    neighbors[i].push(NodeId::from(j));
                }
            }
        }
        for o in &cfg.link_overrides {
            let (a, b) = (o.a.index(), o.b.index());
            if a < n && b < n {
                ratio[a * n + b] = o.rx_success_ratio;
                ratio[b * n + a] = o.rx_success_ratio;
            }
        }
        Medium {
            cfg,
            n,
            audible,
            ratio,
            neighbors,
            active: Vec::new(),
            next_id: 0,
        }
    }

    pub fn config(&self) -> &MediumConfig {
        &self.cfg
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Nodes within range of `node`, in ascending id order, excluding itself.
    pub fn neighbors(&self, node: NodeId) -> &[NodeId] {
        &self.neighbors[node.index()]
    }

    /// True iff `from` is heard at `at` (never true for `from == at`).
    pub fn audible(&self, from: NodeId, at: NodeId) -> bool {
        self.audible[from.index() * self.n + at.index()]
    }

    pub fn link_ratio(&self, a: NodeId, b: NodeId) -> f64 {
        self.ratio[a.index() * self.n + b.index()]
    }

    pub fn active(&self) -> &[Transmission<P>] {
        &self.active
    }

    /// Channel busy as sensed by `node`: it is transmitting itself, or an
    /// in-range node is.
    pub fn carrier_busy(&self, node: NodeId, now: SimTime) -> bool {
        self.active
            .iter()
            .any(|t| t.end > now && (t.sender == node || self.audible(t.sender, node)))
    }

    pub fn is_transmitting(&self, node: NodeId, now: SimTime) -> bool {
        self.active.iter().any(|t| t.end > now && t.sender == node)
    }

    /// Puts a frame on the air and applies the collision rule against every
    /// overlapping transmission.
    pub fn begin(
        &mut self,
        sender: NodeId,
        dest: Option<NodeId>,
        airtime: SimTime,
        now: SimTime,
        payload: P,
    ) -> TxId {
        let receivers: Vec<NodeId> = match dest {
            Some(d) => {
                if self.audible(sender, d) {
                    vec![d]
                } else {
                    Vec::new()
                }
            }
            None => self.neighbors[sender.index()].clone(),
        };
        let ratios = receivers
            .iter()
            .map(|&r| self.link_ratio(sender, r))
            .collect();
        let mut tx = Transmission {
            id: TxId(self.next_id),
            sender,
            dest,
            start: now,
            end: now + airtime,
            corrupted: vec![false; receivers.len()],
            receivers,
            ratios,
            payload,
        };
        self.next_id += 1;

        let n = self.n;
        let audible = &self.audible;
        let hears = |from: NodeId, at: NodeId| from == at || audible[from.index() * n + at.index()];
        for other in self.active.iter_mut().filter(|t| t.end > now) {
            for i in 0..other.receivers.len() {
                if hears(sender, other.receivers[i]) {
                    other.mark_corrupted(i);
                }
            }
            for i in 0..tx.receivers.len() {
                if hears(other.sender, tx.receivers[i]) {
                    tx.mark_corrupted(i);
                }
            }
        }
        let id = tx.id;
        self.active.push(tx);
        id
    }

    /// Removes a transmission from the air and returns it.
    pub fn finish(&mut self, id: TxId) -> Transmission<P> {
        let pos = self
            .active
            .iter()
            .position(|t| t.id == id)
            .expect("finishing an unknown transmission");
        self.active.swap_remove(pos)
    }
}

/// Result of a unicast exchange on an isolated link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnicastOutcome {
    pub success: bool,
    pub attempts_used: u8,
}

/// Acknowledged unicast over an isolated link with no contention: each
/// attempt needs both the data frame and the ACK to get through, each with
/// probability `link_ratio`.
pub fn unicast_with_ack(
    link_ratio: f64,
    max_transmissions: u8,
    stream: &mut RandomStream,
) -> UnicastOutcome {
    for attempt in 1..=max_transmissions {
        let data_ok = stream.bernoulli(link_ratio);
        let ack_ok = stream.bernoulli(link_ratio);
        if data_ok && ack_ok {
            return UnicastOutcome {
                success: true,
                attempts_used: attempt,
            };
        }
    }
    UnicastOutcome {
        success: false,
        attempts_used: max_transmissions,
    }
}

/// Single-shot broadcast on an isolated channel: one independent draw per
/// in-range receiver.
pub fn broadcast(
    receivers: &[NodeId],
    link_ratio: f64,
    stream: &mut RandomStream,
) -> Vec<(NodeId, RxOutcome)> {
    receivers
        .iter()
        .map(|&r| {
            let o = if stream.bernoulli(link_ratio) {
                RxOutcome::Delivered
            } else {
                RxOutcome::LostRandom
            };
            (r, o)
        })
        .collect()
}
