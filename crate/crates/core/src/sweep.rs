//! Cartesian experiment sweeps executed in parallel.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::network::{run_scenario, RunOptions};
use crate::objective::ObjectiveKind;
use crate::output::ResultRow;
use crate::scenario::{ConfigError, ScenarioConfig, TopologyKind};

fn default_base_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub node_counts: Vec<usize>,
    pub objectives: Vec<ObjectiveKind>,
    pub rx_ratios: Vec<f64>,
    pub topologies: Vec<TopologyKind>,
    pub seeds_per_cell: u64,
    #[serde(default = "default_base_seed")]
    pub base_seed: u64,
    /// Every other scenario field; the swept fields and `seed` are overwritten.
    #[serde(default)]
    pub base: ScenarioConfig,
}

impl SweepSpec {
    pub fn from_json_str(s: &str) -> Result<Self, ConfigError> {
        let spec: SweepSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let empty = |field: &str| ConfigError::InvalidField {
            field: field.into(),
            reason: "must list at least one value".into(),
        };
        if self.node_counts.is_empty() {
            return Err(empty("node_counts"));
        }
        if self.objectives.is_empty() {
            return Err(empty("objectives"));
        }
        if self.rx_ratios.is_empty() {
            return Err(empty("rx_ratios"));
        }
        if self.topologies.is_empty() {
            return Err(empty("topologies"));
        }
        if self.seeds_per_cell == 0 {
            return Err(ConfigError::InvalidField {
                field: "seeds_per_cell".into(),
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// All runs, ordered by topology, objective, rx ratio, node count, seed.
    pub fn runs(&self) -> Vec<ScenarioConfig> {
        let mut out = Vec::new();
        for &topology in &self.topologies {
            for &objective in &self.objectives {
                for &rx in &self.rx_ratios {
                    for &n in &self.node_counts {
                        for k in 0..self.seeds_per_cell {
                            out.push(ScenarioConfig {
                                topology,
                                objective,
                                rx_success_ratio: rx,
                                node_count: n,
                                seed: self.base_seed + k,
                                ..self.base.clone()
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// A run that could not be executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub scenario_id: String,
    pub topology: TopologyKind,
    pub objective: ObjectiveKind,
    pub rx_ratio: f64,
    pub node_count: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<SweepFailure>,
}

/// Runs every cell on `parallelism` worker threads (0 means one per core).
/// Output order follows [`SweepSpec::runs`] whatever the thread count.
pub fn run_sweep(spec: &SweepSpec, parallelism: usize) -> SweepResult {
    run_configs(&spec.runs(), parallelism)
}

pub fn run_configs(configs: &[ScenarioConfig], parallelism: usize) -> SweepResult {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .expect("thread pool");
    let results: Vec<Result<ResultRow, SweepFailure>> = pool.install(|| {
        configs
            .par_iter()
            .map(|cfg| {
                run_scenario(cfg, RunOptions::default())
                    .map(|out| ResultRow::from_outcome(&out))
                    .map_err(|e| SweepFailure {
                        scenario_id: cfg.scenario_id(),
                        topology: cfg.topology,
                        objective: cfg.objective,
                        rx_ratio: cfg.rx_success_ratio,
                        node_count: cfg.node_count,
                        seed: cfg.seed,
                        error: e.to_string(),
                    })
            })
            .collect()
    });
    let mut out = SweepResult::default();
    for r in results {
        match r {
            Ok(row) => out.rows.push(row),
            Err(f) => out.failures.push(f),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_set_is_the_cartesian_product() {
        let spec = SweepSpec::from_json_str(
            r#"{"node_counts":[20,40],"objectives":["of0","etx"],"rx_ratios":[1.0],
                "topologies":["grid"],"seeds_per_cell":3,"base_seed":7}"#,
        )
        .unwrap();
        let runs = spec.runs();
        assert_eq!(runs.len(), 12);
        let seeds: Vec<u64> = runs.iter().take(3).map(|c| c.seed).collect();
        assert_eq!(seeds, vec![7, 8, 9]);
    }

    #[test]
    fn empty_axis_is_rejected() {
        let err = SweepSpec::from_json_str(
            r#"{"node_counts":[],"objectives":["of0"],"rx_ratios":[1.0],
                "topologies":["grid"],"seeds_per_cell":1}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("node_counts"));
    }

    #[test]
    fn failing_cell_is_recorded_and_sweep_continues() {
        let spec = SweepSpec {
            node_counts: vec![3, 20],
            objectives: vec![ObjectiveKind::Of0],
            rx_ratios: vec![1.0],
            topologies: vec![TopologyKind::Random],
            seeds_per_cell: 1,
            base_seed: 1,
            base: ScenarioConfig {
                area_side: 10_000.0,
                duration: 100.0,
                warmup: 10.0,
                ..Default::default()
            },
        };
        let res = run_sweep(&spec, 2);
        assert_eq!(res.rows.len() + res.failures.len(), 2);
        assert!(res
            .failures
            .iter()
            .all(|f| f.error.contains("density too low")));
        assert!(!res.failures.is_empty());
    }
}
