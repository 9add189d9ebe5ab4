mod common;

use rplsim_core::engine::{derive_stream, NodeId, SimTime, StreamPurpose};
use rplsim_core::medium::{broadcast, unicast_with_ack, LinkOverride, Position, RxOutcome};
use rplsim_core::objective::{etx_update, LinkStats};
use rplsim_core::telemetry::PacketOutcome;
use rplsim_core::trace::TraceRecord;
use rplsim_core::{run_scenario, ObjectiveKind, RunOptions, ScenarioConfig, TopologyKind};

fn custom(positions: Vec<Position>, objective: ObjectiveKind, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        node_count: positions.len(),
        topology: TopologyKind::Custom,
        positions: Some(positions),
        objective,
        seed,
        ..Default::default()
    }
}

fn link(a: u32, b: u32, p: f64) -> LinkOverride {
    LinkOverride {
        a: NodeId(a),
        b: NodeId(b),
        rx_success_ratio: p,
    }
}

#[test]
fn etx_estimate_settles_near_expected_sample() {
    for p in [0.6, 0.8, 0.95] {
        let mut s = derive_stream(5, StreamPurpose::Medium, None);
        let mut stats = LinkStats::new(NodeId(1));
        let mut sum = 0.0;
        let rounds = 50_000;
        for i in 0..rounds {
            let o = unicast_with_ack(p, 4, &mut s);
            etx_update(
                &mut stats,
                o.attempts_used,
                o.success,
                4,
                SimTime::from_secs(i),
            );
            if i >= 1000 {
                sum += f64::from(stats.etx);
            }
        }
        let mean = sum / f64::from((rounds - 1000) as u32);
        let want = common::expected_etx_sample(p, 4);
        assert!(
            (mean - want).abs() <= 0.1 * want,
            "p={p}: long-run etx {mean:.1}, expected {want:.1}"
        );
    }
}

#[test]
fn broadcast_receptions_are_binomial() {
    let receivers: Vec<NodeId> = (1..=4).map(NodeId).collect();
    let mut s = derive_stream(17, StreamPurpose::Medium, None);
    let trials = 20_000;
    let mut counts = [0u32; 5];
    for _ in 0..trials {
        let k = broadcast(&receivers, 0.8, &mut s)
            .iter()
            .filter(|(_, o)| *o == RxOutcome::Delivered)
            .count();
        counts[k] += 1;
    }
    let binom = |k: i32| {
        let c = [1.0, 4.0, 6.0, 4.0, 1.0][k as usize];
        c * 0.8f64.powi(k) * 0.2f64.powi(4 - k)
    };
    let chi2: f64 = (0..5)
        .map(|k| {
            let e = binom(k) * f64::from(trials);
            (f64::from(counts[k as usize]) - e).powi(2) / e
        })
        .sum();
    // 99.9th percentile of chi-square with 4 degrees of freedom.
    assert!(chi2 < 18.47, "chi2 = {chi2:.2}, counts {counts:?}");
}

#[test]
fn diamond_prefers_cheaper_branch() {
    let positions = vec![
        Position::new(0.0, 0.0),
        Position::new(80.0, 40.0),
        Position::new(80.0, -40.0),
        Position::new(160.0, 0.0),
    ];
    let ratio = |a: usize, b: usize| -> f64 {
        match (a.min(b), a.max(b)) {
            (0, 2) => 0.6,
            (2, 3) => 0.7,
            (1, 3) => 0.8,
            _ => 1.0,
        }
    };
    for seed in 1..=5 {
        let mut cfg = custom(positions.clone(), ObjectiveKind::Etx, seed);
        cfg.medium.link_overrides = vec![link(0, 2, 0.6), link(2, 3, 0.7), link(1, 3, 0.8)];
        let out = run_scenario(&cfg, RunOptions::default()).unwrap();
        let adj = common::adjacency(&positions, cfg.medium.tx_range);
        let best = common::dijkstra(&adj, |u, v| 128.0 / ratio(u, v).powi(2));
        let parents = out.preferred_parents();
        assert_eq!(parents[3], Some(NodeId(1)), "seed {seed}: {parents:?}");
        let cost = f64::from(out.nodes[3].path_cost.0);
        assert!(
            (cost - best[3]).abs() <= 192.0 * 2.0,
            "seed {seed}: cost {cost} vs optimum {:.1}",
            best[3]
        );
    }
}

#[test]
fn three_hop_line_delivers_in_three_hops() {
    let positions: Vec<Position> = (0..4)
        .map(|i| Position::new(90.0 * f64::from(i), 0.0))
        .collect();
    for objective in [ObjectiveKind::Of0, ObjectiveKind::Etx] {
        let cfg = custom(positions.clone(), objective, 3);
        let out = run_scenario(&cfg, RunOptions { record_trace: true }).unwrap();
        let hops: Vec<u8> = out
            .trace
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Packet {
                    origin,
                    outcome: PacketOutcome::Delivered,
                    hops,
                    ..
                } if *origin == NodeId(3) => Some(*hops),
                _ => None,
            })
            .collect();
        assert!(!hops.is_empty());
        assert!(hops.iter().all(|&h| h == 3), "{objective:?}: {hops:?}");
    }
}

#[test]
fn twenty_nodes_converge_within_a_minute() {
    for seed in 1..=10 {
        let cfg = ScenarioConfig {
            seed,
            rx_success_ratio: 0.8,
            ..Default::default()
        };
        let out = run_scenario(&cfg, RunOptions::default()).unwrap();
        let t = out.report.convergence_time.expect("converges");
        assert!(t < SimTime::from_secs(60), "seed {seed}: {t:?}");
    }
}

#[test]
fn unreachable_node_stays_unjoined_and_drops_no_route() {
    let positions = vec![
        Position::new(0.0, 0.0),
        Position::new(50.0, 0.0),
        Position::new(1000.0, 0.0),
    ];
    let out = run_scenario(
        &custom(positions, ObjectiveKind::Of0, 1),
        RunOptions::default(),
    )
    .unwrap();
    assert!(!out.nodes[2].is_joined());
    assert!(out.report.convergence_time.is_none());
    assert!(out.report.total().drops.no_route > 0);
}
