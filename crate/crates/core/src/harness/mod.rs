//! Cycle-driven simulation: scenario construction, the per-cycle loop for
//! Seer and the baselines, QoS sampling, metrics, threshold sweeps and the
//! files a run leaves behind.

pub mod config;
pub mod output;
pub mod qos;
pub mod scenario;
pub mod sim;
pub mod sweep;

pub use config::{desk_workload, BetaEstimation, BetaPolicy, FleetConfig, PredictorChoice, SimulationConfig, WorldConfig};
pub use output::{write_metrics, write_run, write_timing, write_utilization, METRICS_COLUMNS};
pub use qos::{qos_sample, QosModelParams};
pub use scenario::Scenario;
pub use sim::{median, run_observed, run_scenario, run_simulation, CycleMetrics, CycleView, RunOutput, Summary};
pub use sweep::{default_threads, parse_grid, run_parallel, sweep_thresholds, write_sweep, SweepRow};

use crate::predictor::PredictorError;
use crate::revenue::RevenueError;
use crate::workload::WorkloadError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("cycle {0}: {1}")]
    Cycle(usize, String),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Revenue(#[from] RevenueError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error(transparent)]
    Write(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
