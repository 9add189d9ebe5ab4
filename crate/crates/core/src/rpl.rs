//! Per-node RPL state: DODAG join, candidate parents, rank, and loop
//! avoidance. Timers and radio I/O live in the network layer; the functions
//! here only mutate state and report what changed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{NodeId, SimTime};
use crate::objective::{
    etx_update, mrhof_path_cost, mrhof_rank, mrhof_select_parent, of0_rank, of0_select_parent,
    LinkStats, ObjectiveKind, PathCost, Rank, MIN_HOP_RANK_INCREASE,
};
use crate::scenario::{ProtocolConfig, TrafficClassName};
use crate::trickle::TrickleState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DioMessage {
    pub sender: NodeId,
    pub advertised_rank: Rank,
    pub dodag_version: u8,
    pub of_identifier: ObjectiveKind,
    /// Present only under MRHOF.
    pub path_cost: Option<PathCost>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Sink,
    Sensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: NodeId,
    pub rank: Rank,
    pub cost: PathCost,
    /// Last DIO or acknowledged unicast from this neighbor.
    pub last_heard: SimTime,
}

/// Summary of a state change, used to drive trickle and DIS timers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub joined: bool,
    pub detached: bool,
    pub parent_changed: bool,
    pub rank_before: Rank,
    pub rank_after: Rank,
}

impl Transition {
    /// Whether the change is big enough to reset trickle. Sub-hop rank drift
    /// (MRHOF cost noise) does not count.
    pub fn inconsistent(&self) -> bool {
        let delta = i32::from(self.rank_after.0) - i32::from(self.rank_before.0);
        self.joined
            || self.detached
            || self.parent_changed
            || delta.unsigned_abs() >= u32::from(MIN_HOP_RANK_INCREASE)
    }
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: NodeId,
    pub role: Role,
    pub rank: Rank,
    pub preferred_parent: Option<NodeId>,
    /// Sorted by id.
    pub candidate_parents: Vec<Candidate>,
    pub trickle: TrickleState,
    pub link_stats: BTreeMap<NodeId, LinkStats>,
    pub traffic_class: Option<TrafficClassName>,
    pub objective: ObjectiveKind,
    /// Own path cost (MRHOF); zero at the sink, MAX while unjoined.
    pub path_cost: PathCost,
    /// Lowest rank held since the last join.
    pub lowest_rank: Rank,
    max_rank_increase: u16,
    parent_expiry: SimTime,
    max_transmissions: u8,
}

impl NodeState {
    pub fn new(
        id: NodeId,
        objective: ObjectiveKind,
        traffic_class: Option<TrafficClassName>,
        protocol: &ProtocolConfig,
        max_transmissions: u8,
    ) -> Self {
        let sink = id == NodeId::SINK;
        let rank = if sink { Rank::ROOT } else { Rank::INFINITE };
        NodeState {
            id,
            role: if sink { Role::Sink } else { Role::Sensor },
            rank,
            preferred_parent: None,
            candidate_parents: Vec::new(),
            trickle: TrickleState::new(protocol.trickle()),
            link_stats: BTreeMap::new(),
            traffic_class,
            objective,
            path_cost: if sink { PathCost::ZERO } else { PathCost::MAX },
            lowest_rank: rank,
            max_rank_increase: protocol.max_rank_increase,
            parent_expiry: SimTime::from_secs_f64(protocol.parent_expiry),
            max_transmissions,
        }
    }

    pub fn is_sink(&self) -> bool {
        self.role == Role::Sink
    }

    pub fn is_joined(&self) -> bool {
        self.is_sink() || (self.preferred_parent.is_some() && !self.rank.is_infinite())
    }

    pub fn dio(&self) -> DioMessage {
        DioMessage {
            sender: self.id,
            advertised_rank: self.rank,
            dodag_version: 0,
            of_identifier: self.objective,
            path_cost: match self.objective {
                ObjectiveKind::Of0 => None,
                ObjectiveKind::Etx => Some(self.path_cost),
            },
        }
    }

    pub fn candidate(&self, id: NodeId) -> Option<&Candidate> {
        self.candidate_parents
            .binary_search_by_key(&id, |c| c.id)
            .ok()
            .map(|i| &self.candidate_parents[i])
    }

    pub fn link_etx(&self, neighbor: NodeId) -> u32 {
        self.link_stats
            .get(&neighbor)
            .map_or(crate::objective::ETX_INITIAL, |l| l.etx)
    }

    /// Refreshes the sender as a candidate and re-runs parent selection. An
    /// infinite-rank DIO withdraws the sender instead.
    pub fn on_dio_received(&mut self, dio: &DioMessage, now: SimTime) -> Transition {
        if self.is_sink() {
            return self.unchanged();
        }
        if dio.advertised_rank.is_infinite() {
            let removed = self.remove_candidate(dio.sender);
            return if removed && self.preferred_parent == Some(dio.sender) {
                self.reselect()
            } else {
                self.unchanged()
            };
        }
        let c = Candidate {
            id: dio.sender,
            rank: dio.advertised_rank,
            cost: dio.path_cost.unwrap_or(PathCost::ZERO),
            last_heard: now,
        };
        match self
            .candidate_parents
            .binary_search_by_key(&dio.sender, |c| c.id)
        {
            Ok(i) => self.candidate_parents[i] = c,
            Err(i) => self.candidate_parents.insert(i, c),
        }
        self.reselect()
    }

    /// Folds the outcome of a unicast towards `neighbor` into the link
    /// estimate. A failed exchange with a neighbor not heard from for the
    /// expiry period drops it from the candidate set, unless it is the only
    /// usable one.
    pub fn record_unicast(
        &mut self,
        neighbor: NodeId,
        attempts_used: u8,
        success: bool,
        now: SimTime,
    ) -> Transition {
        let max_tx = self.max_transmissions;
        let stats = self
            .link_stats
            .entry(neighbor)
            .or_insert_with(|| LinkStats::new(neighbor));
        etx_update(stats, attempts_used.max(1), success, max_tx, now);
        if self.is_sink() {
            return self.unchanged();
        }
        if let Ok(i) = self
            .candidate_parents
            .binary_search_by_key(&neighbor, |c| c.id)
        {
            if success {
                self.candidate_parents[i].last_heard = now;
            } else if now.saturating_sub(self.candidate_parents[i].last_heard) >= self.parent_expiry
                && self.has_alternative_to(neighbor)
            {
                self.candidate_parents.remove(i);
            }
        }
        if self.objective == ObjectiveKind::Etx || self.candidate(neighbor).is_none() {
            self.reselect()
        } else {
            self.unchanged()
        }
    }

    /// Another candidate that could serve as parent right now.
    fn has_alternative_to(&self, id: NodeId) -> bool {
        self.candidate_parents
            .iter()
            .any(|c| c.id != id && !c.rank.is_infinite() && c.rank < self.rank)
    }

    fn unchanged(&self) -> Transition {
        Transition {
            joined: false,
            detached: false,
            parent_changed: false,
            rank_before: self.rank,
            rank_after: self.rank,
        }
    }

    fn remove_candidate(&mut self, id: NodeId) -> bool {
        match self.candidate_parents.binary_search_by_key(&id, |c| c.id) {
            Ok(i) => {
                self.candidate_parents.remove(i);
                true
            }
            Err(_) => false,
        }
    }

    /// Re-runs the objective function over the eligible candidates: those
    /// ranked strictly below the node, plus the current parent.
    pub fn reselect(&mut self) -> Transition {
        let was_joined = self.is_joined();
        let rank_before = self.rank;
        let parent_before = self.preferred_parent;
        if self.is_sink() {
            return self.unchanged();
        }

        let own = self.rank;
        let eligible =
            |c: &Candidate| !c.rank.is_infinite() && (c.rank < own || Some(c.id) == parent_before);
        let choice: Option<(NodeId, Rank, PathCost)> = match self.objective {
            ObjectiveKind::Of0 => {
                let list: Vec<(NodeId, Rank)> = self
                    .candidate_parents
                    .iter()
                    .filter(|c| eligible(c))
                    .map(|c| (c.id, c.rank))
                    .collect();
                of0_select_parent(&list, parent_before).and_then(|p| {
                    let c = self.candidate(p).expect("chosen parent is a candidate");
                    of0_rank(c.rank).map(|r| (p, r, PathCost::ZERO))
                })
            }
            ObjectiveKind::Etx => {
                let list: Vec<(NodeId, PathCost)> = self
                    .candidate_parents
                    .iter()
                    .filter(|c| eligible(c))
                    .map(|c| (c.id, mrhof_path_cost(c.cost, self.link_etx(c.id))))
                    .collect();
                mrhof_select_parent(&list, parent_before).map(|p| {
                    let cost = list.iter().find(|(id, _)| *id == p).unwrap().1;
                    let c = self.candidate(p).expect("chosen parent is a candidate");
                    (p, mrhof_rank(c.rank, cost), cost)
                })
            }
        };

        match choice {
            Some((parent, rank, cost)) if !rank.is_infinite() => {
                let limit = u32::from(self.lowest_rank.0) + u32::from(self.max_rank_increase);
                if was_joined && u32::from(rank.0) > limit {
                    return self.detach(rank_before, parent_before);
                }
                self.preferred_parent = Some(parent);
                self.rank = rank;
                self.path_cost = cost;
                if !was_joined || rank < self.lowest_rank {
                    self.lowest_rank = rank;
                }
                if rank > rank_before && was_joined {
                    // Anything at or above our old rank may be a descendant.
                    self.candidate_parents
                        .retain(|c| c.rank < rank_before || c.id == parent);
                }
                Transition {
                    joined: !was_joined,
                    detached: false,
                    parent_changed: was_joined && parent_before != Some(parent),
                    rank_before,
                    rank_after: rank,
                }
            }
            _ if was_joined => self.detach(rank_before, parent_before),
            _ => self.unchanged(),
        }
    }

    /// Leaves the DODAG: infinite rank, no parent, no candidates.
    fn detach(&mut self, rank_before: Rank, _parent_before: Option<NodeId>) -> Transition {
        self.rank = Rank::INFINITE;
        self.preferred_parent = None;
        self.path_cost = PathCost::MAX;
        self.lowest_rank = Rank::INFINITE;
        self.candidate_parents.clear();
        Transition {
            joined: false,
            detached: true,
            parent_changed: true,
            rank_before,
            rank_after: Rank::INFINITE,
        }
    }
}

/// What a node does with a data packet it must send upwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardDecision {
    NextHop(NodeId),
    NoRoute,
    TtlExceeded,
}

pub fn forward_decision(node: &NodeState, hops: u8, ttl: u8) -> ForwardDecision {
    debug_assert!(!node.is_sink());
    if hops >= ttl {
        return ForwardDecision::TtlExceeded;
    }
    match node.preferred_parent {
        Some(p) if node.is_joined() => ForwardDecision::NextHop(p),
        _ => ForwardDecision::NoRoute,
    }
}
