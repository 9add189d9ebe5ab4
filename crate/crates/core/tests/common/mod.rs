//! Independent reference computations used by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};

use rplsim_core::engine::{NodeId, SimTime};
use rplsim_core::medium::Position;
use rplsim_core::trace::{RadioMode, TraceRecord};

pub fn adjacency(positions: &[Position], range: f64) -> Vec<Vec<usize>> {
    let n = positions.len();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| {
                    j != i && {
                        let dx = positions[i].x - positions[j].x;
                        let dy = positions[i].y - positions[j].y;
                        (dx * dx + dy * dy).sqrt() <= range
                    }
                })
                .collect()
        })
        .collect()
}

/// Hop distance from node 0.
pub fn bfs_hops(adj: &[Vec<usize>]) -> Vec<Option<u32>> {
    let mut dist = vec![None; adj.len()];
    dist[0] = Some(0);
    let mut q = VecDeque::from([0usize]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(dist[u].unwrap() + 1);
                q.push_back(v);
            }
        }
    }
    dist
}

/// Shortest path cost from node 0 with O(n²) Dijkstra; `w(u, v)` is the
/// edge weight.
pub fn dijkstra(adj: &[Vec<usize>], w: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[0] = 0.0;
    for _ in 0..n {
        let Some(u) = (0..n)
            .filter(|&i| !done[i] && dist[i].is_finite())
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
        else {
            break;
        };
        done[u] = true;
        for &v in &adj[u] {
            let d = dist[u] + w(u, v);
            if d < dist[v] {
                dist[v] = d;
            }
        }
    }
    dist
}

/// True iff following parents from every node that has one reaches node 0
/// within `n - 1` steps, through nodes that all have parents.
pub fn parents_form_tree(parents: &[Option<NodeId>]) -> Result<(), String> {
    let n = parents.len();
    if parents[0].is_some() {
        return Err("sink has a parent".into());
    }
    for start in 1..n {
        if parents[start].is_none() {
            continue;
        }
        let mut cur = start;
        let mut steps = 0;
        while cur != 0 {
            let Some(p) = parents[cur] else {
                return Err(format!("node {start}: path hits parentless node {cur}"));
            };
            cur = p.index();
            steps += 1;
            if steps > n - 1 {
                return Err(format!("node {start}: cycle"));
            }
        }
    }
    Ok(())
}

/// Number of parent links from `node` to node 0.
pub fn path_hops(parents: &[Option<NodeId>], node: usize) -> u32 {
    let mut cur = node;
    let mut hops = 0;
    while cur != 0 {
        cur = parents[cur].expect("joined path").index();
        hops += 1;
    }
    hops
}

/// Per-node ledger recomputed from radio records: TX time is the union of TX
/// intervals, RX time is the rest of the union of all radio intervals, CPU
/// active is the union of everything, LPM the remainder. Everything is
/// clipped to `[0, horizon)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReplayLedger {
    pub t_tx: u64,
    pub t_rx: u64,
    pub t_cpu: u64,
    pub t_lpm: u64,
}

fn union_length(mut iv: Vec<(u64, u64)>) -> u64 {
    iv.sort_unstable();
    let mut total = 0;
    let mut cur: Option<(u64, u64)> = None;
    for (s, e) in iv {
        match cur {
            Some((cs, ce)) if s <= ce => cur = Some((cs, ce.max(e))),
            Some((cs, ce)) => {
                total += ce - cs;
                cur = Some((s, e));
            }
            None => cur = Some((s, e)),
        }
    }
    if let Some((cs, ce)) = cur {
        total += ce - cs;
    }
    total
}

pub fn replay_energy(trace: &[TraceRecord], nodes: usize, horizon: SimTime) -> Vec<ReplayLedger> {
    let h = horizon.as_micros();
    let mut tx: BTreeMap<usize, Vec<(u64, u64)>> = BTreeMap::new();
    let mut all: BTreeMap<usize, Vec<(u64, u64)>> = BTreeMap::new();
    for r in trace {
        if let TraceRecord::Radio {
            node,
            mode,
            start,
            end,
        } = r
        {
            let (s, e) = (start.as_micros().min(h), end.as_micros().min(h));
            if s >= e {
                continue;
            }
            all.entry(node.index()).or_default().push((s, e));
            if *mode == RadioMode::Tx {
                tx.entry(node.index()).or_default().push((s, e));
            }
        }
    }
    (0..nodes)
        .map(|i| {
            let t_tx = union_length(tx.remove(&i).unwrap_or_default());
            let on = union_length(all.remove(&i).unwrap_or_default());
            ReplayLedger {
                t_tx,
                t_rx: on - t_tx,
                t_cpu: on,
                t_lpm: h - on,
            }
        })
        .collect()
}

/// Exhaustive enumeration of the data/ACK outcomes of up to `max_tx`
/// attempts, each leg succeeding with probability `p`. Returns the exact
/// distribution of `(attempts_used, success)`.
pub fn enumerate_unicast(p: f64, max_tx: u32) -> Vec<((u32, bool), f64)> {
    let legs = 2 * max_tx;
    let mut dist: BTreeMap<(u32, bool), f64> = BTreeMap::new();
    for mask in 0u32..(1 << legs) {
        let mut prob = 1.0;
        for leg in 0..legs {
            prob *= if mask >> leg & 1 == 1 { p } else { 1.0 - p };
        }
        let mut outcome = (max_tx, false);
        for k in 0..max_tx {
            let data = mask >> (2 * k) & 1 == 1;
            let ack = mask >> (2 * k + 1) & 1 == 1;
            if data && ack {
                outcome = (k + 1, true);
                break;
            }
        }
        *dist.entry(outcome).or_default() += prob;
    }
    dist.into_iter().collect()
}

pub fn expected_attempts(p: f64, max_tx: u32) -> f64 {
    enumerate_unicast(p, max_tx)
        .iter()
        .map(|((k, _), pr)| *k as f64 * pr)
        .sum()
}

/// Expected ETX sample in scale-128 units: `128 * attempts` on success, the
/// `2 * max_tx * 128` penalty on failure.
pub fn expected_etx_sample(p: f64, max_tx: u32) -> f64 {
    enumerate_unicast(p, max_tx)
        .iter()
        .map(|((k, ok), pr)| {
            let sample = if *ok { 128 * k } else { 2 * max_tx * 128 };
            sample as f64 * pr
        })
        .sum()
}
