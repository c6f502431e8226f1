//! Measurement statistics: sample autocorrelation, spatial Pearson
//! correlation and nearest-rank empirical CDFs.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("series needs at least 2 values, got {0}")]
    TooShort(usize),
    #[error("series has zero variance; correlation is undefined")]
    ZeroVariance,
    #[error("max lag {max_lag} must be below the series length {len}")]
    LagTooLarge { max_lag: usize, len: usize },
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no samples")]
    Empty,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample autocorrelation ρ(h) for h = 0..=max_lag, normalised by the
/// lag-0 sum of squares around the global mean.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>, AnalysisError> {
    let n = series.len();
    if n < 2 {
        return Err(AnalysisError::TooShort(n));
    }
    if max_lag >= n {
        return Err(AnalysisError::LagTooLarge { max_lag, len: n });
    }
    let mu = mean(series);
    let centered: Vec<f64> = series.iter().map(|d| d - mu).collect();
    let denom: f64 = centered.iter().map(|d| d * d).sum();
    if denom == 0.0 {
        return Err(AnalysisError::ZeroVariance);
    }
    Ok((0..=max_lag)
        .map(|h| {
            let num: f64 = centered[h..]
                .iter()
                .zip(&centered[..n - h])
                .map(|(a, b)| a * b)
                .sum();
            num / denom
        })
        .collect())
}

/// Pearson correlation of two equally long series.
pub fn pearson_corr(a: &[f64], b: &[f64]) -> Result<f64, AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(AnalysisError::TooShort(a.len()));
    }
    let (ma, mb) = (mean(a), mean(b));
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return Err(AnalysisError::ZeroVariance);
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Result<Self, AnalysisError> {
        if samples.is_empty() {
            return Err(AnalysisError::Empty);
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Nearest-rank index for percentile `p` in [0, 100]: ceil(p/100·n), 1-based,
    /// with p = 0 mapped to the first sample.
    pub fn rank(&self, p: f64) -> usize {
        nearest_rank(p, self.sorted.len())
    }

    /// Value at percentile `p` in [0, 100].
    pub fn query(&self, p: f64) -> f64 {
        self.sorted[self.rank(p) - 1]
    }

    /// Fraction of samples ≤ `x`.
    pub fn fraction_at_or_below(&self, x: f64) -> f64 {
        self.sorted.partition_point(|v| *v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }
}

/// 1-based nearest rank of percentile `p` among `n` sorted samples.
pub fn nearest_rank(p: f64, n: usize) -> usize {
    let p = p.clamp(0.0, 100.0);
    ((p / 100.0 * n as f64).ceil() as usize).clamp(1, n)
}

pub fn empirical_cdf(samples: &[f64]) -> Result<EmpiricalCdf, AnalysisError> {
    EmpiricalCdf::new(samples)
}
