//! Deterministic discrete-event simulator of RPL upward routing over a lossy
//! unit-disk radio medium.

pub mod engine;
pub mod medium;
pub mod network;
pub mod objective;
pub mod output;
pub mod rpl;
pub mod scenario;
pub mod sweep;
pub mod telemetry;
pub mod trace;
pub mod trickle;

pub use engine::{NodeId, SimTime};
pub use network::{run_scenario, RunOptions, RunOutcome};
pub use objective::{ObjectiveKind, PathCost, Rank};
pub use output::ResultRow;
pub use scenario::{ConfigError, ScenarioConfig, TopologyKind, TrafficClassName};
pub use sweep::{run_sweep, SweepSpec};
pub use telemetry::{EnergyConfig, EnergyLedger, MetricsReport};
