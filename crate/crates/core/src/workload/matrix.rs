use super::{CategoryTable, ClusterModel, Request, WorkloadError};
use crate::workload::assign_category;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Per-location, per-category request counts of one cycle (M × N).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestMatrix {
    pub cycle: usize,
    pub counts: Array2<u32>,
}

impl RequestMatrix {
    pub fn zeros(cycle: usize, locations: usize, categories: usize) -> Self {
        Self {
            cycle,
            counts: Array2::zeros((locations, categories)),
        }
    }

    pub fn locations(&self) -> usize {
        self.counts.nrows()
    }

    pub fn categories(&self) -> usize {
        self.counts.ncols()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    /// Requests per category summed over locations.
    pub fn category_totals(&self) -> Vec<u64> {
        self.counts
            .columns()
            .into_iter()
            .map(|col| col.iter().map(|&c| u64::from(c)).sum())
            .collect()
    }

    /// Requests per location summed over categories.
    pub fn location_totals(&self) -> Vec<u64> {
        self.counts
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|&c| u64::from(c)).sum())
            .collect()
    }

    pub fn as_f64(&self) -> Array2<f64> {
        self.counts.mapv(f64::from)
    }
}

/// Counts requests by (location, nearest category). All requests must share a cycle.
pub fn aggregate_matrix(
    requests: &[Request],
    model: &ClusterModel,
    locations: usize,
) -> Result<RequestMatrix, WorkloadError> {
    let cycle = requests.first().map_or(0, |r| r.cycle);
    let mut matrix = RequestMatrix::zeros(cycle as usize, locations, model.k());
    for r in requests {
        if r.cycle != cycle {
            return Err(WorkloadError::MixedCycles {
                first: cycle,
                other: r.cycle,
            });
        }
        let m = r.location as usize;
        if m >= locations {
            return Err(WorkloadError::LocationOutOfRange { location: m, locations });
        }
        matrix.counts[[m, assign_category(r, model)]] += 1;
    }
    Ok(matrix)
}

/// A request reduced to what the schedulers need.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Arrival {
    pub location: u16,
    pub category: u16,
}

impl Arrival {
    pub fn new(location: usize, category: usize) -> Self {
        Self {
            location: location as u16,
            category: category as u16,
        }
    }

    pub fn m(&self) -> usize {
        usize::from(self.location)
    }

    pub fn i(&self) -> usize {
        usize::from(self.category)
    }
}

/// Actual demand of one cycle: the count matrix plus arrivals in order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleDemand {
    pub matrix: RequestMatrix,
    pub arrivals: Vec<Arrival>,
}

impl CycleDemand {
    pub fn from_requests(
        cycle: usize,
        requests: &[Request],
        table: &CategoryTable,
        locations: usize,
    ) -> Self {
        let mut matrix = RequestMatrix::zeros(cycle, locations, table.k());
        let arrivals = requests
            .iter()
            .map(|r| {
                let a = Arrival::new(r.location as usize, table.category(r));
                matrix.counts[[a.m(), a.i()]] += 1;
                a
            })
            .collect();
        Self { matrix, arrivals }
    }

    /// Builds a demand whose arrivals are the matrix cells in row-major order.
    pub fn from_matrix(matrix: RequestMatrix) -> Self {
        let mut arrivals = Vec::with_capacity(matrix.total() as usize);
        for ((m, i), &c) in matrix.counts.indexed_iter() {
            arrivals.extend(std::iter::repeat_n(Arrival::new(m, i), c as usize));
        }
        Self { matrix, arrivals }
    }

    pub fn total(&self) -> usize {
        self.arrivals.len()
    }
}
