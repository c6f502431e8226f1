use super::{ContentCategory, Platform, Request, RequestTrace, WorkloadError};
use crate::rng::{indexed_stream, SimRng};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A daily busy window, in minutes since midnight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakWindow {
    pub center: f64,
    pub half_width: f64,
}

/// Distribution of request features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMix {
    /// Weights over [`ContentCategory::ALL`].
    pub content: [f64; 4],
    /// Weights over [`Platform::ALL`].
    pub platform: [f64; 4],
    /// Number of bitrate classes; classes are `0..bitrate_classes`.
    pub bitrate_classes: u8,
    /// Log-weight slope per bitrate class, per platform. Positive favours high classes.
    pub platform_bitrate_tilt: [f64; 4],
    /// Slope reduction applied during peak windows (viewers pick lower bitrates).
    pub peak_bitrate_shift: f64,
}

impl Default for FeatureMix {
    fn default() -> Self {
        Self {
            content: [0.2, 0.35, 0.3, 0.15],
            platform: [0.3, 0.2, 0.4, 0.1],
            bitrate_classes: 4,
            platform_bitrate_tilt: [0.6, 0.3, -0.3, -0.1],
            peak_bitrate_shift: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadConfig {
    pub locations: usize,
    pub horizon: usize,
    /// Cycles per day.
    pub period: usize,
    /// Off-peak mean requests per cycle, per location.
    pub base_rates: Vec<f64>,
    /// Intensity ratio between peak windows and the off-peak level.
    pub peak_multiplier: f64,
    pub peaks: Vec<PeakWindow>,
    /// Logistic edge width of the peak plateaus, in cycles. 0 gives hard edges.
    pub peak_edge: f64,
    /// Relative amplitude of the daily sinusoid.
    pub diurnal_amplitude: f64,
    /// Cycle at which the sinusoid crosses zero upwards.
    pub diurnal_phase: f64,
    /// Standard deviation of a per-day scale factor shared by all locations.
    pub day_jitter: f64,
    pub mix: FeatureMix,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            locations: 6,
            horizon: 2880,
            period: 1440,
            base_rates: vec![330.0, 240.0, 180.0, 150.0, 120.0, 90.0],
            peak_multiplier: 5.0,
            peaks: vec![
                PeakWindow {
                    center: 750.0,
                    half_width: 120.0,
                },
                PeakWindow {
                    center: 1230.0,
                    half_width: 150.0,
                },
            ],
            peak_edge: 5.0,
            diurnal_amplitude: 0.3,
            diurnal_phase: 420.0,
            day_jitter: 0.05,
            mix: FeatureMix::default(),
        }
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |msg: String| Err(WorkloadError::InvalidConfig(msg));
        if self.locations == 0 {
            return bad("locations must be at least 1".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.period == 0 {
            return bad("period must be at least 1".into());
        }
        if self.base_rates.len() != self.locations {
            return bad(format!(
                "{} base rates for {} locations",
                self.base_rates.len(),
                self.locations
            ));
        }
        if self
            .base_rates
            .iter()
            .any(|r| !r.is_finite() || *r < 0.0)
        {
            return bad("base rates must be finite and non-negative".into());
        }
        if !(self.peak_multiplier.is_finite() && self.peak_multiplier >= 0.0) {
            return bad("peak multiplier must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.diurnal_amplitude) {
            return bad("diurnal amplitude must lie in [0, 1]".into());
        }
        if self.peak_edge < 0.0 || self.day_jitter < 0.0 {
            return bad("peak edge and day jitter must be non-negative".into());
        }
        for weights in [&self.mix.content, &self.mix.platform] {
            if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || weights.iter().sum::<f64>() <= 0.0
            {
                return bad("feature weights must be non-negative with a positive sum".into());
            }
        }
        if self.mix.bitrate_classes == 0 {
            return bad("at least one bitrate class is required".into());
        }
        Ok(())
    }
}

/// Cycle-addressable request generator: cycle `t` is drawn from its own
/// stream, so any cycle can be produced without generating its predecessors.
#[derive(Clone, Debug)]
pub struct TraceGenerator {
    config: WorkloadConfig,
    seed: u64,
    content_cdf: [f64; 4],
    platform_cdf: [f64; 4],
    // [platform][peak] cumulative weights over bitrate classes
    bitrate_cdf: Vec<Vec<f64>>,
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect()
}

fn pick(cdf: &[f64], u: f64) -> usize {
    cdf.iter()
        .position(|&c| u < c)
        .unwrap_or(cdf.len() - 1)
}

impl TraceGenerator {
    pub fn new(config: &WorkloadConfig, seed: u64) -> Result<Self, WorkloadError> {
        config.validate()?;
        let mix = &config.mix;
        let to_array = |v: Vec<f64>| -> [f64; 4] { [v[0], v[1], v[2], v[3]] };
        let mut bitrate_cdf = Vec::with_capacity(8);
        for p in 0..4 {
            for peak in [false, true] {
                let slope =
                    mix.platform_bitrate_tilt[p] - if peak { mix.peak_bitrate_shift } else { 0.0 };
                let weights: Vec<f64> = (0..mix.bitrate_classes)
                    .map(|c| (slope * f64::from(c)).exp())
                    .collect();
                bitrate_cdf.push(cumulative(&weights));
            }
        }
        Ok(Self {
            content_cdf: to_array(cumulative(&mix.content)),
            platform_cdf: to_array(cumulative(&mix.platform)),
            bitrate_cdf,
            config: config.clone(),
            seed,
        })
    }

    pub fn config(&self) -> &WorkloadConfig {
        &self.config
    }

    fn circular_distance(&self, cycle: usize, center: f64) -> f64 {
        let period = self.config.period as f64;
        let phase = (cycle % self.config.period) as f64;
        let d = (phase - center).rem_euclid(period);
        d.min(period - d)
    }

    pub fn is_peak(&self, cycle: usize) -> bool {
        self.config
            .peaks
            .iter()
            .any(|p| self.circular_distance(cycle, p.center) <= p.half_width)
    }

    /// Shared shape of the intensity: sinusoid times a double plateau.
    pub fn shape(&self, cycle: usize) -> f64 {
        let cfg = &self.config;
        let period = cfg.period as f64;
        let diurnal = (1.0
            + cfg.diurnal_amplitude * (2.0 * PI * (cycle as f64 - cfg.diurnal_phase) / period).sin())
        .max(0.0);
        let bump = cfg
            .peaks
            .iter()
            .map(|p| {
                let d = self.circular_distance(cycle, p.center);
                if cfg.peak_edge == 0.0 {
                    if d <= p.half_width {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    1.0 / (1.0 + ((d - p.half_width) / cfg.peak_edge).exp())
                }
            })
            .fold(0.0, f64::max);
        diurnal * (1.0 + (cfg.peak_multiplier - 1.0) * bump)
    }

    fn day_factor(&self, cycle: usize) -> f64 {
        if self.config.day_jitter == 0.0 {
            return 1.0;
        }
        let day = (cycle / self.config.period) as u64;
        let mut rng = indexed_stream(self.seed, "workload/day", day);
        let z: f64 = StandardNormal.sample(&mut rng);
        (1.0 + self.config.day_jitter * z).max(0.2)
    }

    /// Expected number of requests at `location` in `cycle`.
    pub fn intensity(&self, location: usize, cycle: usize) -> f64 {
        self.config.base_rates[location] * self.day_factor(cycle) * self.shape(cycle)
    }

    fn sample_request(&self, rng: &mut SimRng, cycle: usize, location: usize, peak: bool) -> Request {
        let content = ContentCategory::ALL[pick(&self.content_cdf, rng.random())];
        let platform = Platform::ALL[pick(&self.platform_cdf, rng.random())];
        let cdf = &self.bitrate_cdf[platform.index() * 2 + usize::from(peak)];
        Request {
            cycle: cycle as u32,
            location: location as u16,
            content,
            platform,
            peak,
            bitrate_class: pick(cdf, rng.random()) as u8,
        }
    }

    /// All requests of one cycle, in arrival order.
    pub fn cycle_requests(&self, cycle: usize) -> Vec<Request> {
        let mut rng = indexed_stream(self.seed, "workload/cycle", cycle as u64);
        let peak = self.is_peak(cycle);
        let day = self.day_factor(cycle);
        let shape = self.shape(cycle);
        let mut requests = Vec::new();
        for location in 0..self.config.locations {
            let lambda = self.config.base_rates[location] * day * shape;
            let count = if lambda > 0.0 {
                Poisson::new(lambda).map(|p| p.sample(&mut rng) as usize).unwrap_or(0)
            } else {
                0
            };
            requests.reserve(count);
            for _ in 0..count {
                requests.push(self.sample_request(&mut rng, cycle, location, peak));
            }
        }
        requests.shuffle(&mut rng);
        requests
    }
}

/// Generates `config.horizon` cycles of requests.
pub fn synthesize_trace(config: &WorkloadConfig, seed: u64) -> Result<RequestTrace, WorkloadError> {
    let generator = TraceGenerator::new(config, seed)?;
    let requests = (0..config.horizon)
        .flat_map(|t| generator.cycle_requests(t))
        .collect();
    RequestTrace::new(requests, config.horizon, config.locations)
}
