//! Everything a run needs that does not depend on the scheduler under test:
//! the cycle demands, the fleet, the trained revenue model and predictor.
//! Building it once lets every scheduler and sweep point see identical inputs.

use super::config::{PredictorChoice, SimulationConfig};
use super::HarnessError;
use crate::predictor::{round_prediction, seasonal_naive_predict, train_predictor, PredictorParams, TrainingReport};
use crate::prescheduler::apportion;
use crate::revenue::{train_revenue_model, RevenueFeatures, RevenueModel, RevenueSample};
use crate::revenue::{build_revenue_matrix, RevenueMatrix, Server, ServerFleet};
use crate::rng::{substream, substream_seed};
use crate::scheduler::DistanceModel;
use crate::workload::{fit_clusters, load_trace, ClusterModel, CycleDemand, Request, RequestMatrix, TraceGenerator};
use ndarray::Array3;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use std::time::Instant;

/// Bitrate slot of the request feature encoding, in [0, 1].
const BITRATE_FEATURE: usize = 9;
/// Cycles sampled for clustering.
const CLUSTER_CYCLES: usize = 96;

pub struct Scenario {
    pub locations: usize,
    pub categories: usize,
    pub warmup: usize,
    pub clusters: ClusterModel,
    /// Matrices of every cycle, warm-up first.
    pub matrices: Vec<RequestMatrix>,
    /// Demand of each evaluated cycle, index 0 = first cycle after warm-up.
    pub demands: Vec<CycleDemand>,
    pub fleet: ServerFleet,
    pub distance: DistanceModel,
    /// Ground-truth per-request throughput, E × M × N.
    pub truth: Array3<f64>,
    pub quality: Vec<f64>,
    pub revenue_model: RevenueModel,
    /// Learned revenue matrix used for planning and as realized load.
    pub revenue: RevenueMatrix,
    pub predictor_choice: PredictorChoice,
    pub predictor: Option<PredictorParams>,
    pub training: Option<TrainingReport>,
    pub period: usize,
}

enum Source {
    Synthetic(TraceGenerator),
    Loaded(Vec<Vec<Request>>),
}

impl Source {
    fn requests(&self, cycle: usize) -> Vec<Request> {
        match self {
            Source::Synthetic(g) => g.cycle_requests(cycle),
            Source::Loaded(cycles) => cycles[cycle].clone(),
        }
    }
}

fn weighted_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return k;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

impl Scenario {
    pub fn build(config: &SimulationConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let root = config.seed;
        let m_count = config.workload.locations;
        let total = config.trace_len();
        let started = Instant::now();

        let source = match &config.trace {
            Some(path) => {
                let trace = load_trace(path, m_count)?;
                if trace.horizon < total {
                    return Err(HarnessError::Config(format!(
                        "trace has {} cycles, warmup + horizon needs {total}",
                        trace.horizon
                    )));
                }
                let cycles: Vec<Vec<Request>> = trace.cycles().take(total).map(|(_, r)| r.to_vec()).collect();
                Source::Loaded(cycles)
            }
            None => {
                let mut workload = config.workload.clone();
                workload.horizon = total;
                Source::Synthetic(TraceGenerator::new(&workload, substream_seed(root, "workload"))?)
            }
        };

        let step = (config.warmup / CLUSTER_CYCLES).max(1);
        let sample: Vec<Request> = (0..config.warmup).step_by(step).flat_map(|c| source.requests(c)).collect();
        let clusters = fit_clusters(&sample, config.categories, substream_seed(root, "kmeans"))?;
        let table = clusters.category_table();
        let n_count = clusters.k();

        let mut matrices = Vec::with_capacity(total);
        let mut demands = Vec::with_capacity(config.horizon);
        for c in 0..total {
            let d = CycleDemand::from_requests(c, &source.requests(c), &table, m_count);
            matrices.push(d.matrix.clone());
            if c >= config.warmup {
                demands.push(d);
            }
        }

        // fleet layout and ground truth
        let fc = &config.fleet;
        let mut rng = substream(root, "fleet");
        let weights = fc.location_weights.clone().unwrap_or_else(|| vec![1.0; m_count]);
        let per_location = apportion(fc.servers as u32, &weights);
        let mut locations: Vec<usize> =
            per_location.iter().enumerate().flat_map(|(m, &k)| std::iter::repeat_n(m, k as usize)).collect();
        locations.shuffle(&mut rng);
        let quality: Vec<f64> = (0..fc.servers).map(|_| rng.random_range(fc.quality[0]..=fc.quality[1])).collect();
        let spread: Vec<f64> =
            (0..fc.servers).map(|_| 1.0 + fc.bandwidth_spread * rng.random_range(-1.0..=1.0)).collect();

        let w = &config.world;
        let rate: Vec<f64> = clusters
            .centroids
            .iter()
            .map(|c| w.rate_range[0] + (w.rate_range[1] - w.rate_range[0]) * c[BITRATE_FEATURE].clamp(0.0, 1.0))
            .collect();
        let truth = Array3::from_shape_fn((fc.servers, m_count, n_count), |(e, m, i)| {
            let d = (m as f64 - locations[e] as f64).abs();
            rate[i] * quality[e] / (1.0 + w.distance_decay * d)
        });

        // size the fleet against the busiest warm-up cycle at fleet-mean throughput
        let peak_load = matrices[..config.warmup]
            .iter()
            .map(|r| {
                r.counts
                    .indexed_iter()
                    .map(|((m, i), &c)| {
                        let mean = (0..fc.servers).map(|e| truth[[e, m, i]]).sum::<f64>() / fc.servers as f64;
                        f64::from(c) * mean
                    })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        let mean_bandwidth = (fc.capacity_ratio * peak_load / fc.servers as f64).max(1.0);
        let servers: Vec<Server> = (0..fc.servers)
            .map(|e| Server {
                id: e,
                bandwidth: mean_bandwidth * spread[e],
                location: locations[e],
                active: true,
            })
            .collect();
        let fleet = ServerFleet::new(servers)?;

        // historical throughput logs: warm-up requests on uniformly chosen servers
        let mut rng = substream(root, "world");
        let samples: Vec<RevenueSample> = (0..w.training_samples)
            .map(|_| {
                let r = &matrices[rng.random_range(0..config.warmup)];
                let cells: Vec<f64> = r.counts.iter().map(|&c| f64::from(c)).collect();
                let cell = if cells.iter().any(|&c| c > 0.0) {
                    weighted_index(&cells, &mut rng)
                } else {
                    rng.random_range(0..cells.len())
                };
                let (m, i) = (cell / n_count, cell % n_count);
                let e = rng.random_range(0..fc.servers);
                let noise: f64 = rng.sample(StandardNormal);
                RevenueSample {
                    features: RevenueFeatures {
                        category: i,
                        location: m,
                        server: e,
                        bandwidth: fleet.servers[e].bandwidth,
                        server_location: locations[e],
                    },
                    label: (truth[[e, m, i]] * (1.0 + w.label_noise * noise)).max(0.0),
                }
            })
            .collect();
        let revenue_model = train_revenue_model(&samples, &config.gbdt)?;
        let revenue = build_revenue_matrix(&revenue_model, &fleet, m_count, n_count);
        if revenue.values().iter().any(|&v| v <= 0.0) {
            return Err(HarnessError::Config("revenue model predicts a non-positive throughput".into()));
        }

        let (predictor, training) = if config.predictor == PredictorChoice::AeGru {
            let mut pc = config.predictor_config.clone();
            pc.seed ^= substream_seed(root, "predictor");
            let (params, report) = train_predictor(&matrices[..config.warmup], &pc)?;
            log::info!(
                "predictor trained on {} windows: loss {:.5} -> {:.5}",
                report.samples,
                report.initial(),
                report.best()
            );
            (Some(params), Some(report))
        } else {
            (None, None)
        };
        log::info!("scenario built in {:.1}s", started.elapsed().as_secs_f64());

        Ok(Self {
            locations: m_count,
            categories: n_count,
            warmup: config.warmup,
            clusters,
            matrices,
            demands,
            fleet,
            distance: DistanceModel::line(m_count),
            truth,
            quality,
            revenue_model,
            revenue,
            predictor_choice: config.predictor,
            predictor,
            training,
            period: config.period(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.demands.len()
    }

    /// Forecast of evaluated cycle `t`, built from the matrices before it.
    pub fn predict(&self, t: usize) -> Result<RequestMatrix, HarnessError> {
        let c = self.warmup + t;
        let history = &self.matrices[..c];
        Ok(match self.predictor_choice {
            PredictorChoice::Perfect => self.matrices[c].clone(),
            PredictorChoice::SeasonalNaive => seasonal_naive_predict(history, self.period)?,
            PredictorChoice::AeGru => {
                let params = self.predictor.as_ref().expect("AE-GRU scenario carries trained params");
                round_prediction(c, &params.predict_next(history)?)
            }
        })
    }
}
