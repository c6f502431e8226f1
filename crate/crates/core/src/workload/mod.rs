//! Request traces: synthesis, CSV ingestion, feature clustering and per-cycle
//! aggregation into location × category matrices.
//!
//! Locations and categories are 0-based inside the library. The trace CSV
//! uses 1-based locations, which [`load_trace`] and [`save_trace`] convert.

mod cluster;
mod csv_io;
mod matrix;
mod synth;

pub use cluster::{
    assign_category, fit_clusters, fit_clusters_with_report, CategoryTable, ClusterModel,
    FeatureEncoding, FeatureVector, KMeansReport, FEATURE_DIM,
};
pub use csv_io::{load_trace, save_trace, write_trace};
pub use matrix::{aggregate_matrix, Arrival, CycleDemand, RequestMatrix};
pub use synth::{synthesize_trace, FeatureMix, PeakWindow, TraceGenerator, WorkloadConfig};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid workload config: {0}")]
    InvalidConfig(String),
    #[error("trace is missing column `{0}`")]
    MissingColumn(String),
    #[error("trace row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("trace has no requests (horizon 0)")]
    EmptyTrace,
    #[error("need at least {k} distinct feature points, found {distinct}")]
    TooFewDistinctPoints { distinct: usize, k: usize },
    #[error("k must be at least 1")]
    ZeroClusters,
    #[error("requests span several cycles ({first} and {other})")]
    MixedCycles { first: u32, other: u32 },
    #[error("request location {location} outside 0..{locations}")]
    LocationOutOfRange { location: usize, locations: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: [$name; [$($text),+].len()] = [$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }

            pub fn index(self) -> usize {
                self as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!("unknown {} `{}`", stringify!($name), other)),
                }
            }
        }
    };
}

string_enum!(
    /// Channel content of a live stream.
    ContentCategory {
        CompetitiveGaming => "competitive_gaming",
        Entertainment => "entertainment",
        MobileGame => "mobile_game",
        Other => "other",
    }
);

string_enum!(
    /// Viewing device.
    Platform {
        Pc => "pc",
        Web => "web",
        Smartphone => "smartphone",
        Tablet => "tablet",
    }
);

/// One live-streaming request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Request {
    pub cycle: u32,
    /// 0-based location index.
    pub location: u16,
    pub content: ContentCategory,
    pub platform: Platform,
    /// Issued during a peak window.
    pub peak: bool,
    pub bitrate_class: u8,
}

/// Ordered requests of a run, grouped by non-decreasing cycle.
#[derive(Clone, Debug, PartialEq)]
pub struct RequestTrace {
    pub requests: Vec<Request>,
    pub horizon: usize,
    pub locations: usize,
}

impl RequestTrace {
    pub fn new(
        requests: Vec<Request>,
        horizon: usize,
        locations: usize,
    ) -> Result<Self, WorkloadError> {
        if horizon == 0 {
            return Err(WorkloadError::EmptyTrace);
        }
        let mut last = 0u32;
        for (row, r) in requests.iter().enumerate() {
            if r.cycle < last {
                return Err(WorkloadError::BadRow {
                    row: row + 1,
                    message: format!("cycle {} after cycle {}", r.cycle, last),
                });
            }
            if r.cycle as usize >= horizon {
                return Err(WorkloadError::BadRow {
                    row: row + 1,
                    message: format!("cycle {} beyond horizon {}", r.cycle, horizon),
                });
            }
            if r.location as usize >= locations {
                return Err(WorkloadError::LocationOutOfRange {
                    location: r.location as usize,
                    locations,
                });
            }
            last = r.cycle;
        }
        Ok(Self {
            requests,
            horizon,
            locations,
        })
    }

    /// Requests of each cycle in order. Cycles without requests yield empty slices.
    pub fn cycles(&self) -> impl Iterator<Item = (usize, &[Request])> + '_ {
        let mut start = 0;
        (0..self.horizon).map(move |cycle| {
            let end = start
                + self.requests[start..]
                    .iter()
                    .take_while(|r| r.cycle as usize == cycle)
                    .count();
            let slice = &self.requests[start..end];
            start = end;
            (cycle, slice)
        })
    }

    /// Per-cycle request totals of one location, or of the whole trace when `None`.
    pub fn counts_per_cycle(&self, location: Option<usize>) -> Vec<f64> {
        let mut counts = vec![0.0; self.horizon];
        for r in &self.requests {
            if location.is_none_or(|m| m == r.location as usize) {
                counts[r.cycle as usize] += 1.0;
            }
        }
        counts
    }
}
