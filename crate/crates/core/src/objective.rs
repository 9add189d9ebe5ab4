//! Objective functions: OF0 (hop-count rank) and MRHOF over ETX, plus the
//! EWMA link-ETX estimator that feeds MRHOF.
//!
//! ETX values and path costs are fixed point with 128 = ETX 1.0. Ranks use
//! `MIN_HOP_RANK_INCREASE = 256` per hop, so a root child has rank 512.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::{NodeId, SimTime};

pub const MIN_HOP_RANK_INCREASE: u16 = 256;
pub const ETX_SCALE: u32 = 128;
/// MRHOF parent-switch threshold (1.5 ETX).
pub const PARENT_SWITCH_THRESHOLD: u32 = 192;
/// Initial estimate for links never used for unicast (ETX 2.0).
pub const ETX_INITIAL: u32 = 256;
/// EWMA weight of the previous estimate, in percent.
pub const ETX_ALPHA_OLD: u32 = 90;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rank(pub u16);

impl Rank {
    pub const ROOT: Rank = Rank(MIN_HOP_RANK_INCREASE);
    pub const INFINITE: Rank = Rank(0xFFFF);

    pub fn is_infinite(self) -> bool {
        self == Rank::INFINITE
    }

    /// Rank in whole hops (`rank / 256`).
    pub fn hops(self) -> u16 {
        self.0 / MIN_HOP_RANK_INCREASE
    }

    fn saturating_from(v: u32) -> Rank {
        Rank(v.min(u32::from(Rank::INFINITE.0)) as u16)
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Additive ETX path cost, scale 128.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PathCost(pub u16);

impl PathCost {
    pub const ZERO: PathCost = PathCost(0);
    pub const MAX: PathCost = PathCost(0xFFFF);

    pub fn is_max(self) -> bool {
        self == PathCost::MAX
    }

    pub fn as_etx(self) -> f64 {
        f64::from(self.0) / f64::from(ETX_SCALE)
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    #[default]
    Of0,
    Etx,
}

impl ObjectiveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveKind::Of0 => "of0",
            ObjectiveKind::Etx => "etx",
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectiveKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "of0" => Ok(ObjectiveKind::Of0),
            "etx" | "mrhof" => Ok(ObjectiveKind::Etx),
            other => Err(format!("unknown objective `{other}`")),
        }
    }
}

/// Per-neighbor link estimate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkStats {
    pub neighbor: NodeId,
    /// Fixed point, 128 = ETX 1.0. Never below 128.
    pub etx: u32,
    pub tx_attempt_count: u64,
    pub tx_success_count: u64,
    pub last_updated: SimTime,
}

impl LinkStats {
    pub fn new(neighbor: NodeId) -> Self {
        Self::with_initial(neighbor, ETX_INITIAL)
    }

    pub fn with_initial(neighbor: NodeId, initial: u32) -> Self {
        LinkStats {
            neighbor,
            etx: initial.max(ETX_SCALE),
            tx_attempt_count: 0,
            tx_success_count: 0,
            last_updated: SimTime::ZERO,
        }
    }
}

/// OF0 rank through a parent: `parent + 256`, saturating at infinity.
/// Returns `None` for an infinite parent rank.
pub fn of0_rank(parent_advertised_rank: Rank) -> Option<Rank> {
    if parent_advertised_rank.is_infinite() {
        return None;
    }
    Some(Rank::saturating_from(
        u32::from(parent_advertised_rank.0) + u32::from(MIN_HOP_RANK_INCREASE),
    ))
}

/// Minimum advertised rank, lowest id on ties. The current parent is kept
/// unless some candidate is strictly better than it.
pub fn of0_select_parent(candidates: &[(NodeId, Rank)], current: Option<NodeId>) -> Option<NodeId> {
    let best = candidates
        .iter()
        .filter(|(_, r)| !r.is_infinite())
        .min_by_key(|(id, r)| (*r, *id))?;
    if let Some(cur) = current {
        if let Some((_, cur_rank)) = candidates
            .iter()
            .find(|(id, r)| *id == cur && !r.is_infinite())
        {
            if best.1 >= *cur_rank {
                return Some(cur);
            }
        }
    }
    Some(best.0)
}

/// Folds one unicast outcome into the link estimate.
///
/// The sample is `attempts_used * 128` on success, or the failure penalty
/// `2 * max_transmissions * 128`; the estimate moves 10% towards it,
/// truncated, and never drops below 128.
pub fn etx_update(
    stats: &mut LinkStats,
    attempts_used: u8,
    success: bool,
    max_transmissions: u8,
    now: SimTime,
) {
    debug_assert!(attempts_used >= 1);
    let sample = if success {
        u32::from(attempts_used) * ETX_SCALE
    } else {
        2 * u32::from(max_transmissions) * ETX_SCALE
    };
    let next = (ETX_ALPHA_OLD * stats.etx + (100 - ETX_ALPHA_OLD) * sample) / 100;
    stats.etx = next.max(ETX_SCALE);
    stats.tx_attempt_count += u64::from(attempts_used);
    if success {
        stats.tx_success_count += 1;
    }
    stats.last_updated = now;
}

/// Parent cost plus link ETX, saturating at [`PathCost::MAX`].
pub fn mrhof_path_cost(parent_cost: PathCost, link_etx: u32) -> PathCost {
    if parent_cost.is_max() {
        return PathCost::MAX;
    }
    let sum = u32::from(parent_cost.0) + link_etx;
    PathCost(sum.min(u32::from(PathCost::MAX.0)) as u16)
}

/// Rank under MRHOF: the cost converted to rank units (one ETX = one hop),
/// floored at the OF0 rank through the same parent so rank stays strictly
/// above the parent's.
pub fn mrhof_rank(parent_rank: Rank, path_cost: PathCost) -> Rank {
    if parent_rank.is_infinite() || path_cost.is_max() {
        return Rank::INFINITE;
    }
    let floor = u32::from(parent_rank.0) + u32::from(MIN_HOP_RANK_INCREASE);
    let scaled = u32::from(Rank::ROOT.0)
        + u32::from(path_cost.0) * u32::from(MIN_HOP_RANK_INCREASE) / ETX_SCALE;
    Rank::saturating_from(floor.max(scaled))
}

/// Minimum path cost with hysteresis: with a current parent, switch only if
/// the best candidate beats it by at least [`PARENT_SWITCH_THRESHOLD`].
pub fn mrhof_select_parent(
    candidates: &[(NodeId, PathCost)],
    current: Option<NodeId>,
) -> Option<NodeId> {
    let best = candidates
        .iter()
        .filter(|(_, c)| !c.is_max())
        .min_by_key(|(id, c)| (*c, *id))?;
    if let Some(cur) = current {
        if let Some((_, cur_cost)) = candidates.iter().find(|(id, c)| *id == cur && !c.is_max()) {
            let gain = u32::from(cur_cost.0).saturating_sub(u32::from(best.1 .0));
            if gain < PARENT_SWITCH_THRESHOLD {
                return Some(cur);
            }
        }
    }
    Some(best.0)
}
