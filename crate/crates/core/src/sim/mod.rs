//! Closed-loop simulation: scenario files, ground truth, moving obstacles,
//! the multi-rate engine and its outputs.

pub mod engine;
pub mod movers;
pub mod output;
pub mod scenario;
pub mod world;

pub use engine::{
    compute_metrics, run, LogSummary, Metrics, MoverRecord, Record, RunResult, RunStatus, SimError, Simulation,
};
pub use scenario::{Scenario, ScenarioError};
