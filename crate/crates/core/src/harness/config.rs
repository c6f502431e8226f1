use super::qos::QosModelParams;
use super::HarnessError;
use crate::baselines::{MaxFlowConfig, SchedulerKind};
use crate::predictor::PredictorConfig;
use crate::prescheduler::{Mode, PreschedulerConfig};
use crate::revenue::GbdtConfig;
use crate::revenue::RevenueCurveParams;
use crate::workload::WorkloadConfig;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorChoice {
    #[default]
    AeGru,
    SeasonalNaive,
    /// Ground truth of the next cycle, for oracle runs.
    Perfect,
}

impl std::str::FromStr for PredictorChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ae_gru" => Ok(Self::AeGru),
            "seasonal_naive" => Ok(Self::SeasonalNaive),
            "perfect" => Ok(Self::Perfect),
            other => Err(format!("unknown predictor `{other}`")),
        }
    }
}

/// Where the planning β comes from. Revenue is always evaluated with the
/// configured curve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaPolicy {
    #[default]
    Fixed,
    /// Re-estimated from the accumulated QoS history every `interval` cycles.
    Estimated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BetaEstimation {
    pub interval: usize,
    pub min: f64,
    pub max: f64,
}

impl Default for BetaEstimation {
    fn default() -> Self {
        Self {
            interval: 240,
            min: 0.7,
            max: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FleetConfig {
    pub servers: usize,
    /// Total bandwidth as a multiple of the busiest warm-up cycle's load.
    pub capacity_ratio: f64,
    /// Relative half-width of the uniform bandwidth spread around the mean.
    pub bandwidth_spread: f64,
    /// Weights over locations for placing servers; uniform when absent.
    pub location_weights: Option<Vec<f64>>,
    /// Range of the per-server throughput quality factor.
    pub quality: [f64; 2],
}

impl Default for FleetConfig {
    fn default() -> Self {
        Self {
            servers: 40,
            capacity_ratio: 1.5,
            bandwidth_spread: 0.2,
            location_weights: None,
            quality: [0.7, 1.3],
        }
    }
}

/// Ground-truth throughput: A(e, m, i) = rate_i · q_e / (1 + decay · d(m, L_e)).
/// The revenue model never sees it directly, only noisy samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    /// Throughput of the lowest and highest bitrate class.
    pub rate_range: [f64; 2],
    pub distance_decay: f64,
    /// Relative standard deviation of logged throughput samples.
    pub label_noise: f64,
    pub training_samples: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            rate_range: [1.0, 4.0],
            distance_decay: 0.3,
            label_noise: 0.1,
            training_samples: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub seed: u64,
    /// Cycles of history before the evaluated horizon, used for training.
    pub warmup: usize,
    pub horizon: usize,
    /// Fixed at one minute.
    pub decision_interval_minutes: u32,
    /// Number of request categories (clusters).
    pub categories: usize,
    pub workload: WorkloadConfig,
    /// Trace CSV replacing the synthetic workload.
    pub trace: Option<PathBuf>,
    pub fleet: FleetConfig,
    pub world: WorldConfig,
    pub revenue: RevenueCurveParams,
    pub gbdt: GbdtConfig,
    pub predictor: PredictorChoice,
    pub predictor_config: PredictorConfig,
    /// Seasonal-naive period; the workload period when absent.
    pub seasonal_period: Option<usize>,
    pub scheduler: SchedulerKind,
    pub mode: Mode,
    pub prescheduler: PreschedulerConfig,
    pub maxflow: MaxFlowConfig,
    pub qos: QosModelParams,
    pub beta_policy: BetaPolicy,
    pub beta_estimation: BetaEstimation,
    /// Permanently deactivate a server after this many consecutive cycles below α.
    pub withdrawal_patience: Option<usize>,
    /// Solve the pre-schedule inside the cycle instead of ahead of it.
    pub inline: bool,
    pub output_dir: Option<PathBuf>,
}

/// About 5k requests per cycle on average, peaks at three times off-peak.
pub fn desk_workload() -> WorkloadConfig {
    WorkloadConfig {
        base_rates: vec![825.0, 600.0, 450.0, 375.0, 300.0, 225.0],
        peak_multiplier: 3.0,
        ..WorkloadConfig::default()
    }
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            warmup: 1440,
            horizon: 2880,
            decision_interval_minutes: 1,
            categories: 8,
            workload: desk_workload(),
            trace: None,
            fleet: FleetConfig::default(),
            world: WorldConfig::default(),
            revenue: RevenueCurveParams::default(),
            gbdt: GbdtConfig::default(),
            predictor: PredictorChoice::default(),
            predictor_config: PredictorConfig {
                epochs: 30,
                learning_rate: 0.1,
                batch_size: 4,
                ..PredictorConfig::default()
            },
            seasonal_period: None,
            scheduler: SchedulerKind::default(),
            mode: Mode::default(),
            prescheduler: PreschedulerConfig::default(),
            maxflow: MaxFlowConfig::default(),
            qos: QosModelParams::default(),
            beta_policy: BetaPolicy::default(),
            beta_estimation: BetaEstimation::default(),
            withdrawal_patience: None,
            inline: false,
            output_dir: None,
        }
    }
}

impl SimulationConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Io(path.display().to_string(), e))?;
        let config: Self = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Total trace length: warm-up plus evaluated horizon.
    pub fn trace_len(&self) -> usize {
        self.warmup + self.horizon
    }

    pub fn period(&self) -> usize {
        self.seasonal_period.unwrap_or(self.workload.period)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.decision_interval_minutes != 1 {
            return bad("decision interval is fixed at 1 minute".into());
        }
        if self.categories == 0 {
            return bad("categories must be at least 1".into());
        }
        if self.warmup == 0 {
            return bad("warmup must be at least 1 cycle".into());
        }
        self.revenue.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.trace.is_none() {
            let mut w = self.workload.clone();
            w.horizon = self.trace_len();
            w.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        self.predictor_config
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.predictor == PredictorChoice::AeGru && self.warmup <= self.predictor_config.window {
            return bad(format!(
                "warmup {} must exceed the predictor window {}",
                self.warmup, self.predictor_config.window
            ));
        }
        if self.period() == 0 {
            return bad("seasonal period must be positive".into());
        }
        if self.predictor == PredictorChoice::SeasonalNaive && self.warmup < self.period() {
            return bad(format!("warmup {} shorter than seasonal period {}", self.warmup, self.period()));
        }
        let f = &self.fleet;
        if f.servers == 0 {
            return bad("fleet needs at least one server".into());
        }
        if !(f.capacity_ratio.is_finite() && f.capacity_ratio > 0.0) {
            return bad("capacity_ratio must be positive".into());
        }
        if !(0.0..1.0).contains(&f.bandwidth_spread) {
            return bad("bandwidth_spread must lie in [0, 1)".into());
        }
        if !(f.quality[0] > 0.0 && f.quality[0] <= f.quality[1]) {
            return bad("quality range must be positive and ordered".into());
        }
        if let Some(w) = &f.location_weights {
            if w.len() != self.workload.locations || w.iter().any(|x| !(*x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                return bad("location_weights must have one non-negative weight per location".into());
            }
        }
        let world = &self.world;
        if !(world.rate_range[0] > 0.0 && world.rate_range[0] <= world.rate_range[1]) {
            return bad("rate_range must be positive and ordered".into());
        }
        if world.distance_decay < 0.0 || world.label_noise < 0.0 {
            return bad("distance_decay and label_noise must be non-negative".into());
        }
        if world.training_samples == 0 {
            return bad("training_samples must be positive".into());
        }
        self.qos.validate()?;
        let b = &self.beta_estimation;
        if b.interval == 0 || !(0.0 < b.min && b.min <= b.max && b.max <= 1.0) {
            return bad("beta estimation needs interval > 0 and 0 < min <= max <= 1".into());
        }
        if self.withdrawal_patience == Some(0) {
            return bad("withdrawal_patience must be positive".into());
        }
        Ok(())
    }
}
