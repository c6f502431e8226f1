use super::{RevenueError, RevenueModel, ServerFleet};
use ndarray::Array3;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Expected revenue A[e][m][i] of one request of category `i` from
/// location `m` served on server `e`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevenueMatrix {
    values: Array3<f64>,
}

impl RevenueMatrix {
    pub fn new(values: Array3<f64>) -> Result<Self, RevenueError> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(RevenueError::BadLabel(*v));
        }
        Ok(Self { values })
    }

    pub fn from_fn(
        servers: usize,
        locations: usize,
        categories: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self, RevenueError> {
        Self::new(Array3::from_shape_fn(
            (servers, locations, categories),
            |(e, m, i)| f(e, m, i),
        ))
    }

    #[inline]
    pub fn get(&self, e: usize, m: usize, i: usize) -> f64 {
        self.values[[e, m, i]]
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn servers(&self) -> usize {
        self.values.dim().0
    }

    pub fn locations(&self) -> usize {
        self.values.dim().1
    }

    pub fn categories(&self) -> usize {
        self.values.dim().2
    }

    pub fn max_entry(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// CSV `e,m,i,value` with 1-based indices.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), RevenueError> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["e", "m", "i", "value"])?;
        for ((e, m, i), v) in self.values.indexed_iter() {
            writer.write_record([
                (e + 1).to_string(),
                (m + 1).to_string(),
                (i + 1).to_string(),
                v.to_string(),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}

pub fn build_revenue_matrix(
    model: &RevenueModel,
    fleet: &ServerFleet,
    locations: usize,
    categories: usize,
) -> RevenueMatrix {
    let values = Array3::from_shape_fn((fleet.len(), locations, categories), |(e, m, i)| {
        let s = &fleet.servers[e];
        model.predict_request_revenue(i, m, e, s.bandwidth, s.location)
    });
    RevenueMatrix { values }
}
