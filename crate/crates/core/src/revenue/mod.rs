//! Server fleet, per-request revenue model and matrix, the utilization
//! revenue curve, and the QoS threshold estimator.
//!
//! Revenue and capacity share one unit (throughput per minute), so a
//! server's utilization is the summed revenue of its requests over `B_e`.

mod beta;
mod gbdt;
mod matrix;

pub use beta::{estimate_beta, QosSample};
pub use gbdt::{
    train_revenue_model, train_revenue_model_with_history, GbdtConfig, RegressionTree,
    RevenueFeatures, RevenueModel, RevenueSample, TreeNode,
};
pub use matrix::{build_revenue_matrix, RevenueMatrix};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RevenueError {
    #[error("no training samples")]
    NoSamples,
    #[error("invalid training label {0}")]
    BadLabel(f64),
    #[error("invalid fleet: {0}")]
    InvalidFleet(String),
    #[error("invalid curve parameters: {0}")]
    InvalidCurve(String),
    #[error("empty QoS history")]
    EmptyHistory,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Server {
    /// 0-based, equal to the position in the fleet.
    pub id: usize,
    /// Capacity in revenue units per minute.
    pub bandwidth: f64,
    /// 0-based location.
    pub location: usize,
    pub active: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServerFleet {
    pub servers: Vec<Server>,
}

impl ServerFleet {
    pub fn new(servers: Vec<Server>) -> Result<Self, RevenueError> {
        if servers.is_empty() {
            return Err(RevenueError::InvalidFleet("no servers".into()));
        }
        for (pos, s) in servers.iter().enumerate() {
            if s.id != pos {
                return Err(RevenueError::InvalidFleet(format!(
                    "server at position {pos} has id {}",
                    s.id
                )));
            }
            if !(s.bandwidth.is_finite() && s.bandwidth > 0.0) {
                return Err(RevenueError::InvalidFleet(format!(
                    "server {pos} has bandwidth {}",
                    s.bandwidth
                )));
            }
        }
        Ok(Self { servers })
    }

    /// Fleet from bandwidths and locations, all servers active.
    pub fn from_parts(bandwidths: &[f64], locations: &[usize]) -> Result<Self, RevenueError> {
        if bandwidths.len() != locations.len() {
            return Err(RevenueError::InvalidFleet(
                "bandwidth and location lists differ in length".into(),
            ));
        }
        Self::new(
            bandwidths
                .iter()
                .zip(locations)
                .enumerate()
                .map(|(id, (&bandwidth, &location))| Server {
                    id,
                    bandwidth,
                    location,
                    active: true,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.servers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.servers.is_empty()
    }

    pub fn bandwidths(&self) -> Vec<f64> {
        self.servers.iter().map(|s| s.bandwidth).collect()
    }

    pub fn active_mask(&self) -> Vec<bool> {
        self.servers.iter().map(|s| s.active).collect()
    }

    pub fn total_bandwidth(&self) -> f64 {
        self.servers.iter().map(|s| s.bandwidth).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RevenueCurveParams {
    /// Withdrawal utilization.
    pub alpha: f64,
    /// QoS utilization.
    pub beta: f64,
    /// Revenue multiplier once utilization exceeds `beta`.
    pub gamma_factor: f64,
}

impl Default for RevenueCurveParams {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            beta: 0.8,
            gamma_factor: 0.2,
        }
    }
}

impl RevenueCurveParams {
    pub fn new(alpha: f64, beta: f64, gamma_factor: f64) -> Result<Self, RevenueError> {
        let p = Self {
            alpha,
            beta,
            gamma_factor,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), RevenueError> {
        if !(0.0 <= self.alpha && self.alpha < self.beta && self.beta <= 1.0) {
            return Err(RevenueError::InvalidCurve(format!(
                "need 0 <= alpha < beta <= 1, got alpha {} beta {}",
                self.alpha, self.beta
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma_factor) {
            return Err(RevenueError::InvalidCurve(format!(
                "gamma factor {} outside [0, 1]",
                self.gamma_factor
            )));
        }
        Ok(())
    }

    pub fn with_beta(self, beta: f64) -> Self {
        Self { beta, ..self }
    }
}

/// Revenue of a server at utilization `u`. Both thresholds belong to the
/// linear middle branch.
pub fn server_revenue(u: f64, params: &RevenueCurveParams) -> f64 {
    if u < params.alpha {
        0.0
    } else if u > params.beta {
        params.gamma_factor * u
    } else {
        u
    }
}
