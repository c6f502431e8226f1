use super::RevenueError;
use crate::analysis::nearest_rank;
use serde::{Deserialize, Serialize};

/// One observation of a server's QoS at a given utilization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QosSample {
    pub utilization: f64,
    /// Startup latency in milliseconds.
    pub latency: f64,
    /// Fraction of failed sessions in [0, 1].
    pub error_rate: f64,
}

const PERCENTILE: f64 = 80.0;

/// Utilization of the nearest-rank `p`-th percentile sample when the history
/// is sorted by `metric`. Equal metric values keep history order.
pub fn percentile_utilization(history: &[QosSample], p: f64, metric: impl Fn(&QosSample) -> f64) -> f64 {
    let mut order: Vec<&QosSample> = history.iter().collect();
    order.sort_by(|a, b| metric(a).total_cmp(&metric(b)));
    order[nearest_rank(p, order.len()) - 1].utilization
}

/// β = min(U at the 80th latency percentile, U at the 80th error percentile),
/// clamped to (alpha, 1].
pub fn estimate_beta(history: &[QosSample], alpha: f64) -> Result<f64, RevenueError> {
    if history.is_empty() {
        return Err(RevenueError::EmptyHistory);
    }
    let by_latency = percentile_utilization(history, PERCENTILE, |s| s.latency);
    let by_error = percentile_utilization(history, PERCENTILE, |s| s.error_rate);
    Ok(by_latency.min(by_error).min(1.0).max(alpha.next_up()))
}
