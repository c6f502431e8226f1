//! Synthetic per-server QoS: startup latency grows linearly with utilization,
//! the error rate follows a logistic knee.

use super::HarnessError;
use crate::revenue::QosSample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QosModelParams {
    /// Milliseconds at zero load.
    pub latency_base: f64,
    /// Milliseconds added per unit of utilization.
    pub latency_slope: f64,
    pub latency_noise: f64,
    pub error_knee: f64,
    pub error_steepness: f64,
    pub error_noise: f64,
}

impl Default for QosModelParams {
    fn default() -> Self {
        Self {
            latency_base: 200.0,
            latency_slope: 800.0,
            latency_noise: 40.0,
            error_knee: 0.85,
            error_steepness: 12.0,
            error_noise: 0.01,
        }
    }
}

impl QosModelParams {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let all = [
            self.latency_base,
            self.latency_slope,
            self.latency_noise,
            self.error_knee,
            self.error_steepness,
            self.error_noise,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(HarnessError::Config("QoS parameters must be finite and non-negative".into()));
        }
        Ok(())
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn qos_sample<R: Rng + ?Sized>(u: f64, params: &QosModelParams, rng: &mut R) -> QosSample {
    let n1: f64 = rng.sample(StandardNormal);
    let n2: f64 = rng.sample(StandardNormal);
    let latency = (params.latency_base + params.latency_slope * u + params.latency_noise * n1).max(params.latency_base);
    let error_rate = (logistic(params.error_steepness * (u - params.error_knee)) + params.error_noise * n2).clamp(0.0, 1.0);
    QosSample {
        utilization: u,
        latency,
        error_rate,
    }
}
