//! Experiment description: configuration schema, topology generators,
//! traffic-class assignment and application send times.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{derive_stream, NodeId, RandomStream, SimTime, StreamPurpose};
use crate::medium::{in_range, MediumConfig, Position};
use crate::objective::ObjectiveKind;
use crate::telemetry::EnergyConfig;
use crate::trickle::TrickleConfig;

/// Resampling budget for random layouts.
pub const MAX_TOPOLOGY_ATTEMPTS: usize = 1000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidField { field: String, reason: String },
    #[error(
        "density too low: no connected layout of {node_count} nodes in a {area_side} m square \
         with {tx_range} m range after {attempts} attempts"
    )]
    Disconnected {
        node_count: usize,
        area_side: f64,
        tx_range: f64,
        attempts: usize,
    },
    #[error("grid spacing {spacing} m exceeds the {tx_range} m radio range; the lattice is disconnected")]
    GridSpacing { spacing: f64, tx_range: f64 },
    #[error("malformed configuration: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::InvalidField {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    #[default]
    Random,
    Grid,
    /// Explicit `positions` list; used for fixtures.
    Custom,
}

impl TopologyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TopologyKind::Random => "random",
            TopologyKind::Grid => "grid",
            TopologyKind::Custom => "custom",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TopologyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(TopologyKind::Random),
            "grid" => Ok(TopologyKind::Grid),
            "custom" => Ok(TopologyKind::Custom),
            other => Err(format!("unknown topology `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrafficClassName {
    HighCritical,
    Critical,
    LowCritical,
    Temperature,
}

impl TrafficClassName {
    pub const ALL: [TrafficClassName; 4] = [
        TrafficClassName::HighCritical,
        TrafficClassName::Critical,
        TrafficClassName::LowCritical,
        TrafficClassName::Temperature,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TrafficClassName::HighCritical => "high-critical",
            TrafficClassName::Critical => "critical",
            TrafficClassName::LowCritical => "low-critical",
            TrafficClassName::Temperature => "temperature",
        }
    }
}

impl fmt::Display for TrafficClassName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JitterMode {
    /// Gap drawn uniformly from `[T/2, 3T/2]`.
    UniformJitter,
    /// Gap is exactly `T`.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrafficClass {
    pub name: TrafficClassName,
    pub mean_interval: SimTime,
    pub jitter: JitterMode,
}

impl TrafficClass {
    pub fn of(name: TrafficClassName) -> TrafficClass {
        let (secs, jitter) = match name {
            TrafficClassName::HighCritical => (10, JitterMode::UniformJitter),
            TrafficClassName::Critical => (20, JitterMode::UniformJitter),
            TrafficClassName::LowCritical => (300, JitterMode::Fixed),
            TrafficClassName::Temperature => (3600, JitterMode::UniformJitter),
        };
        TrafficClass {
            name,
            mean_interval: SimTime::from_secs(secs),
            jitter,
        }
    }
}

/// Next application send time after `now` for a node of the given class.
pub fn next_send_time(class: &TrafficClass, now: SimTime, stream: &mut RandomStream) -> SimTime {
    let t = class.mean_interval.as_micros();
    match class.jitter {
        JitterMode::Fixed => now + class.mean_interval,
        JitterMode::UniformJitter => {
            // Inclusive upper bound: [T/2, 3T/2].
            now + SimTime::from_micros(stream.uniform_u64(t / 2, t + t / 2 + 1))
        }
    }
}

/// Sensors (ids `1..=sensor_count`) split into four contiguous, balanced
/// blocks in class order. Earlier classes take the remainder.
pub fn assign_traffic_classes(sensor_count: usize) -> Vec<TrafficClassName> {
    let base = sensor_count / 4;
    let rem = sensor_count % 4;
    let mut out = Vec::with_capacity(sensor_count);
    for (i, class) in TrafficClassName::ALL.iter().enumerate() {
        let size = base + usize::from(i < rem);
        out.extend(std::iter::repeat_n(*class, size));
    }
    out
}

/// RPL and queueing knobs. Durations in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub trickle_i_min: f64,
    pub trickle_doublings: u32,
    pub trickle_redundancy: u32,
    pub dis_period: f64,
    /// A parent not heard from (DIO or ACK) for this long is dropped on the
    /// next MAC failure towards it.
    pub parent_expiry: f64,
    pub queue_capacity: usize,
    pub ttl: u8,
    /// Rank growth above the lowest rank held since joining that forces a detach.
    pub max_rank_increase: u16,
    /// Extra virtual time after `duration` to let in-flight packets settle.
    pub drain: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            trickle_i_min: 4.096,
            trickle_doublings: 8,
            trickle_redundancy: 10,
            dis_period: 5.0,
            parent_expiry: 100.0,
            queue_capacity: 8,
            ttl: 16,
            max_rank_increase: 7 * 256,
            drain: 60.0,
        }
    }
}

impl ProtocolConfig {
    pub fn trickle(&self) -> TrickleConfig {
        TrickleConfig {
            i_min: SimTime::from_secs_f64(self.trickle_i_min),
            doublings: self.trickle_doublings,
            redundancy_k: self.trickle_redundancy,
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.trickle_i_min > 0.0 && self.trickle_i_min.is_finite()) {
            return Err(ConfigError::field(
                "protocol.trickle_i_min",
                "must be positive",
            ));
        }
        if self.trickle_doublings > 20 {
            return Err(ConfigError::field(
                "protocol.trickle_doublings",
                "at most 20",
            ));
        }
        if !(self.dis_period > 0.0 && self.dis_period.is_finite()) {
            return Err(ConfigError::field(
                "protocol.dis_period",
                "must be positive",
            ));
        }
        if !(self.parent_expiry >= 0.0 && self.parent_expiry.is_finite()) {
            return Err(ConfigError::field(
                "protocol.parent_expiry",
                "must be non-negative",
            ));
        }
        if self.queue_capacity == 0 {
            return Err(ConfigError::field(
                "protocol.queue_capacity",
                "must be at least 1",
            ));
        }
        if self.ttl == 0 {
            return Err(ConfigError::field("protocol.ttl", "must be at least 1"));
        }
        if self.max_rank_increase == 0 {
            return Err(ConfigError::field(
                "protocol.max_rank_increase",
                "must be positive",
            ));
        }
        if !(self.drain >= 0.0 && self.drain.is_finite()) {
            return Err(ConfigError::field("protocol.drain", "must be non-negative"));
        }
        Ok(())
    }
}

/// Full description of one simulation run. Durations in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Total nodes, sink included.
    pub node_count: usize,
    pub topology: TopologyKind,
    /// Side of the square deployment area (random topology), meters.
    pub area_side: f64,
    /// Lattice spacing (grid topology), meters.
    pub grid_spacing: f64,
    pub objective: ObjectiveKind,
    pub rx_success_ratio: f64,
    pub duration: f64,
    pub warmup: f64,
    pub seed: u64,
    /// When set, every sensor uses this class instead of the balanced split.
    pub traffic_class: Option<TrafficClassName>,
    /// Node positions for the custom topology; index 0 is the sink.
    pub positions: Option<Vec<Position>>,
    pub medium: MediumConfig,
    pub protocol: ProtocolConfig,
    pub energy: EnergyConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            node_count: 20,
            topology: TopologyKind::Random,
            area_side: 300.0,
            grid_spacing: 60.0,
            objective: ObjectiveKind::Of0,
            rx_success_ratio: 1.0,
            duration: 900.0,
            warmup: 60.0,
            seed: 1,
            traffic_class: None,
            positions: None,
            medium: MediumConfig::default(),
            protocol: ProtocolConfig::default(),
            energy: EnergyConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.node_count < 2 {
            return Err(ConfigError::field(
                "node_count",
                format!(
                    "{} < 2; need a sink and at least one sensor",
                    self.node_count
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.rx_success_ratio) {
            return Err(ConfigError::field(
                "rx_success_ratio",
                format!("{} is outside [0, 1]", self.rx_success_ratio),
            ));
        }
        if !(self.warmup >= 0.0 && self.warmup.is_finite()) {
            return Err(ConfigError::field("warmup", "must be non-negative"));
        }
        if !(self.duration > self.warmup && self.duration.is_finite()) {
            return Err(ConfigError::field(
                "duration",
                format!("{} must exceed warmup {}", self.duration, self.warmup),
            ));
        }
        match self.topology {
            TopologyKind::Random => {
                if !(self.area_side > 0.0 && self.area_side.is_finite()) {
                    return Err(ConfigError::field("area_side", "must be positive"));
                }
            }
            TopologyKind::Grid => {
                if !(self.grid_spacing > 0.0 && self.grid_spacing.is_finite()) {
                    return Err(ConfigError::field("grid_spacing", "must be positive"));
                }
            }
            TopologyKind::Custom => match &self.positions {
                Some(p) if p.len() == self.node_count => {}
                Some(p) => {
                    return Err(ConfigError::field(
                        "positions",
                        format!("{} positions for {} nodes", p.len(), self.node_count),
                    ))
                }
                None => {
                    return Err(ConfigError::field(
                        "positions",
                        "required by the custom topology",
                    ))
                }
            },
        }
        self.medium()
            .validate()
            .map_err(|(f, r)| ConfigError::field(format!("medium.{f}"), r))?;
        self.protocol.validate()?;
        self.energy.validate()?;
        Ok(())
    }

    /// Medium parameters with the scenario's RX ratio applied.
    pub fn medium(&self) -> MediumConfig {
        let mut m = self.medium.clone();
        m.rx_success_ratio = self.rx_success_ratio;
        m
    }

    pub fn duration_time(&self) -> SimTime {
        SimTime::from_secs_f64(self.duration)
    }

    pub fn warmup_time(&self) -> SimTime {
        SimTime::from_secs_f64(self.warmup)
    }

    /// Stable identifier describing the run.
    pub fn scenario_id(&self) -> String {
        format!(
            "{}-{}-rx{:.2}-n{}-s{}",
            self.topology, self.objective, self.rx_success_ratio, self.node_count, self.seed
        )
    }
}

/// True iff the unit-disk graph over `positions` is connected.
pub fn is_connected(positions: &[Position], medium: &MediumConfig) -> bool {
    if positions.is_empty() {
        return true;
    }
    let mut seen = vec![false; positions.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for v in 0..positions.len() {
            if !seen[v] && in_range(&positions[u], &positions[v], medium) {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == positions.len()
}

/// Sink at the center of the square, sensors i.i.d. uniform, whole layout
/// resampled until connected.
pub fn generate_random_topology(
    cfg: &ScenarioConfig,
    stream: &mut RandomStream,
) -> Result<Vec<Position>, ConfigError> {
    let side = cfg.area_side;
    let medium = cfg.medium();
    for _ in 0..MAX_TOPOLOGY_ATTEMPTS {
        let mut positions = Vec::with_capacity(cfg.node_count);
        positions.push(Position::new(side / 2.0, side / 2.0));
        for _ in 1..cfg.node_count {
            let x = stream.uniform_f64(0.0, side);
            let y = stream.uniform_f64(0.0, side);
            positions.push(Position::new(x, y));
        }
        if is_connected(&positions, &medium) {
            return Ok(positions);
        }
    }
    Err(ConfigError::Disconnected {
        node_count: cfg.node_count,
        area_side: side,
        tx_range: medium.tx_range,
        attempts: MAX_TOPOLOGY_ATTEMPTS,
    })
}

/// Row-major lattice with `ceil(sqrt(n))` columns; the sink takes the cell
/// closest to the centroid of the occupied cells (first in row-major order on
/// ties) and sensors fill the remaining cells in order.
pub fn generate_grid_topology(cfg: &ScenarioConfig) -> Result<Vec<Position>, ConfigError> {
    let tx_range = cfg.medium.tx_range;
    if cfg.grid_spacing > tx_range {
        return Err(ConfigError::GridSpacing {
            spacing: cfg.grid_spacing,
            tx_range,
        });
    }
    let n = cfg.node_count;
    let cols = (n as f64).sqrt().ceil() as usize;
    let cells: Vec<(usize, usize)> = (0..n).map(|k| (k % cols, k / cols)).collect();
    let cx = cells.iter().map(|c| c.0 as f64).sum::<f64>() / n as f64;
    let cy = cells.iter().map(|c| c.1 as f64).sum::<f64>() / n as f64;
    let d2 = |c: &(usize, usize)| (c.0 as f64 - cx).powi(2) + (c.1 as f64 - cy).powi(2);
    let mut sink_cell = 0;
    for (k, c) in cells.iter().enumerate() {
        if d2(c) < d2(&cells[sink_cell]) {
            sink_cell = k;
        }
    }
    let to_pos = |c: &(usize, usize)| {
        Position::new(c.0 as f64 * cfg.grid_spacing, c.1 as f64 * cfg.grid_spacing)
    };
    let mut positions = vec![to_pos(&cells[sink_cell])];
    positions.extend(
        cells
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != sink_cell)
            .map(|(_, c)| to_pos(c)),
    );
    Ok(positions)
}

/// Positions plus per-node traffic class (`None` for the sink).
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub positions: Vec<Position>,
    pub classes: Vec<Option<TrafficClassName>>,
}

impl Layout {
    pub fn build(cfg: &ScenarioConfig) -> Result<Layout, ConfigError> {
        let positions = match cfg.topology {
            TopologyKind::Random => {
                let mut stream = derive_stream(cfg.seed, StreamPurpose::Topology, None);
                generate_random_topology(cfg, &mut stream)?
            }
            TopologyKind::Grid => generate_grid_topology(cfg)?,
            TopologyKind::Custom => cfg.positions.clone().ok_or_else(|| {
                ConfigError::field("positions", "required by the custom topology")
            })?,
        };
        let sensors = positions.len() - 1;
        let mut classes = vec![None];
        match cfg.traffic_class {
            Some(c) => classes.extend(std::iter::repeat_n(Some(c), sensors)),
            None => classes.extend(assign_traffic_classes(sensors).into_iter().map(Some)),
        }
        Ok(Layout { positions, classes })
    }

    pub fn class_of(&self, node: NodeId) -> Option<TrafficClassName> {
        self.classes[node.index()]
    }
}
