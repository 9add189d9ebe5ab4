//! Benchmark fixtures for rplsim.

use rplsim_core::{ObjectiveKind, ScenarioConfig, TopologyKind};

/// 900 s run at RX ratio 0.8 with the default area and spacing.
pub fn lossy_scenario(
    node_count: usize,
    topology: TopologyKind,
    objective: ObjectiveKind,
    seed: u64,
) -> ScenarioConfig {
    ScenarioConfig {
        node_count,
        topology,
        objective,
        rx_success_ratio: 0.8,
        seed,
        ..ScenarioConfig::default()
    }
}
