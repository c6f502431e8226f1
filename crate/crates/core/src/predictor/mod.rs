//! Next-cycle request forecasting: a dense autoencoder around a GRU, trained
//! by plain SGD on sliding windows, plus a seasonal-naive fallback.

pub mod network;

use crate::rng::substream;
use crate::workload::RequestMatrix;
use ndarray::{Array1, Array2};
use network::Weights;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("need at least {needed} matrices, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("matrix shape {got:?} does not match {expected:?}")]
    Shape { expected: (usize, usize), got: (usize, usize) },
    #[error("invalid predictor config: {0}")]
    Config(String),
    #[error("training diverged (non-finite parameters)")]
    Diverged,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    pub latent: usize,
    pub window: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Use every `stride`-th window as a training sample.
    pub stride: usize,
    /// Rescale the mini-batch gradient to at most this L2 norm.
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            latent: 32,
            window: 30,
            epochs: 20,
            learning_rate: 0.05,
            batch_size: 8,
            stride: 1,
            clip_norm: Some(5.0),
            seed: 0,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<(), PredictorError> {
        let bad = |msg: &str| Err(PredictorError::Config(msg.to_string()));
        if self.latent == 0 {
            return bad("latent must be positive");
        }
        if self.window == 0 {
            return bad("window must be positive");
        }
        if self.batch_size == 0 || self.stride == 0 {
            return bad("batch_size and stride must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            return bad("clip_norm must be positive");
        }
        Ok(())
    }
}

/// Trained forecaster. Inputs are divided by `scale` (row-major over (m, i))
/// before encoding and outputs multiplied back after decoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorParams {
    pub locations: usize,
    pub categories: usize,
    pub window: usize,
    pub scale: Array1<f64>,
    pub weights: Weights,
}

/// Mean training loss (normalized units) before training and after each epoch.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainingReport {
    pub losses: Vec<f64>,
    pub samples: usize,
}

impl TrainingReport {
    pub fn initial(&self) -> f64 {
        self.losses.first().copied().unwrap_or(f64::NAN)
    }

    pub fn best(&self) -> f64 {
        self.losses.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn check_shape(m: &RequestMatrix, expected: (usize, usize)) -> Result<(), PredictorError> {
    let got = (m.locations(), m.categories());
    if got != expected {
        return Err(PredictorError::Shape { expected, got });
    }
    Ok(())
}

fn flatten(m: &RequestMatrix, scale: &Array1<f64>) -> Array1<f64> {
    let flat: Array1<f64> = m.counts.iter().map(|&c| f64::from(c)).collect();
    flat / scale
}

impl PredictorParams {
    pub fn latent(&self) -> usize {
        self.weights.latent()
    }

    fn shape(&self) -> (usize, usize) {
        (self.locations, self.categories)
    }

    /// Real-valued, non-negative forecast of the matrix following `window`.
    /// Only the last `self.window` matrices are used.
    pub fn predict_next(&self, window: &[RequestMatrix]) -> Result<Array2<f64>, PredictorError> {
        if window.len() < self.window {
            return Err(PredictorError::InsufficientHistory {
                needed: self.window,
                got: window.len(),
            });
        }
        let recent = &window[window.len() - self.window..];
        let mut inputs = Vec::with_capacity(recent.len());
        for m in recent {
            check_shape(m, self.shape())?;
            inputs.push(flatten(m, &self.scale));
        }
        let y = self.weights.forward(&inputs).output * &self.scale;
        Ok(y.into_shape_with_order(self.shape()).expect("decoder width is M·N"))
    }

    pub fn to_json(&self) -> Result<String, PredictorError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, PredictorError> {
        let params: Self = serde_json::from_str(text)?;
        let d = params.locations * params.categories;
        if params.scale.len() != d || params.weights.input_dim() != d || !params.weights.is_finite() {
            return Err(PredictorError::Config("inconsistent or non-finite parameters".into()));
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<(), PredictorError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PredictorError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Rounds a real forecast to counts (half away from zero, negatives to 0).
pub fn round_prediction(cycle: usize, predicted: &Array2<f64>) -> RequestMatrix {
    RequestMatrix {
        cycle,
        counts: predicted.mapv(|v| if v.is_finite() && v > 0.0 { v.round() as u32 } else { 0 }),
    }
}

struct Sample {
    inputs: Vec<Array1<f64>>,
    target: Array1<f64>,
}

fn mean_loss(weights: &Weights, samples: &[Sample]) -> f64 {
    samples
        .iter()
        .map(|s| Weights::loss(&weights.forward(&s.inputs), &s.target))
        .sum::<f64>()
        / samples.len() as f64
}

/// Trains on every window of `config.window` consecutive matrices followed by
/// its successor. The returned parameters are those of the epoch with the
/// lowest full-pass loss (the untrained initialization included).
pub fn train_predictor(
    history: &[RequestMatrix],
    config: &PredictorConfig,
) -> Result<(PredictorParams, TrainingReport), PredictorError> {
    config.validate()?;
    if history.len() <= config.window {
        return Err(PredictorError::InsufficientHistory {
            needed: config.window + 1,
            got: history.len(),
        });
    }
    let shape = (history[0].locations(), history[0].categories());
    for m in history {
        check_shape(m, shape)?;
    }
    let d = shape.0 * shape.1;
    let mut scale = Array1::<f64>::ones(d);
    for m in history {
        for (s, &c) in scale.iter_mut().zip(m.counts.iter()) {
            *s = s.max(f64::from(c));
        }
    }
    let flat: Vec<Array1<f64>> = history.iter().map(|m| flatten(m, &scale)).collect();
    let samples: Vec<Sample> = (config.window..flat.len())
        .step_by(config.stride)
        .map(|t| Sample {
            inputs: flat[t - config.window..t].to_vec(),
            target: flat[t].clone(),
        })
        .collect();

    let mut rng = substream(config.seed, "predictor");
    let mean_target = samples.iter().fold(Array1::zeros(d), |acc, s| acc + &s.target) / samples.len() as f64;
    let mut weights = Weights::init(d, config.latent, &mean_target, &mut rng);
    let mut report = TrainingReport {
        losses: vec![mean_loss(&weights, &samples)],
        samples: samples.len(),
    };
    let mut best = (report.losses[0], weights.clone());
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut grad = Weights::zeros(d, config.latent);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grad.scale(0.0);
            for &k in batch {
                let s = &samples[k];
                weights.backward(&weights.forward(&s.inputs), &s.target, &mut grad);
            }
            grad.scale(1.0 / batch.len() as f64);
            if let Some(limit) = config.clip_norm {
                let norm = grad.squared_norm().sqrt();
                if norm > limit {
                    grad.scale(limit / norm);
                }
            }
            weights.add_scaled(&grad, -config.learning_rate);
        }
        if !weights.is_finite() {
            return Err(PredictorError::Diverged);
        }
        let loss = mean_loss(&weights, &samples);
        log::debug!("predictor epoch {} loss {loss:.6}", epoch + 1);
        report.losses.push(loss);
        if loss < best.0 {
            best = (loss, weights.clone());
        }
    }
    let params = PredictorParams {
        locations: shape.0,
        categories: shape.1,
        window: config.window,
        scale,
        weights: best.1,
    };
    Ok((params, report))
}

/// The matrix observed `period` cycles before the next one.
pub fn seasonal_naive_predict(history: &[RequestMatrix], period: usize) -> Result<RequestMatrix, PredictorError> {
    if period == 0 {
        return Err(PredictorError::Config("period must be positive".into()));
    }
    if history.len() < period {
        return Err(PredictorError::InsufficientHistory {
            needed: period,
            got: history.len(),
        });
    }
    let mut out = history[history.len() - period].clone();
    out.cycle = history.last().map_or(0, |m| m.cycle + 1);
    Ok(out)
}
