use super::{ContentCategory, Platform, Request, WorkloadError};
use crate::rng::SimRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const FEATURE_DIM: usize = 10;
pub type FeatureVector = [f64; FEATURE_DIM];

const MAX_ITERATIONS: usize = 100;
const TOLERANCE: f64 = 1e-9;

/// One-hot content (4), one-hot platform (4), peak flag, bitrate class scaled to [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoding {
    /// Largest bitrate class; maps to 1.0.
    pub bitrate_max: u8,
}

impl FeatureEncoding {
    pub fn encode(&self, r: &Request) -> FeatureVector {
        let mut v = [0.0; FEATURE_DIM];
        v[r.content.index()] = 1.0;
        v[4 + r.platform.index()] = 1.0;
        v[8] = if r.peak { 1.0 } else { 0.0 };
        v[9] = if self.bitrate_max == 0 {
            0.0
        } else {
            f64::from(r.bitrate_class) / f64::from(self.bitrate_max)
        };
        v
    }
}

fn squared_distance(a: &FeatureVector, b: &FeatureVector) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub encoding: FeatureEncoding,
    pub centroids: Vec<FeatureVector>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Index of the nearest centroid; ties go to the lowest index.
    pub fn nearest(&self, point: &FeatureVector) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centroids.iter().enumerate() {
            let d = squared_distance(point, c);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Precomputed categories for every feature combination the encoding covers.
    pub fn category_table(&self) -> CategoryTable {
        let classes = usize::from(self.encoding.bitrate_max) + 1;
        let mut table = Vec::with_capacity(4 * 4 * 2 * classes);
        for content in ContentCategory::ALL {
            for platform in Platform::ALL {
                for peak in [false, true] {
                    for class in 0..classes {
                        let r = Request {
                            cycle: 0,
                            location: 0,
                            content,
                            platform,
                            peak,
                            bitrate_class: class as u8,
                        };
                        table.push(self.nearest(&self.encoding.encode(&r)) as u16);
                    }
                }
            }
        }
        CategoryTable {
            classes,
            table,
            model: self.clone(),
        }
    }
}

/// Category lookup that avoids distance computations on hot paths.
#[derive(Clone, Debug)]
pub struct CategoryTable {
    classes: usize,
    table: Vec<u16>,
    model: ClusterModel,
}

impl CategoryTable {
    pub fn category(&self, r: &Request) -> usize {
        let class = usize::from(r.bitrate_class);
        if class >= self.classes {
            return assign_category(r, &self.model);
        }
        let idx = ((r.content.index() * 4 + r.platform.index()) * 2 + usize::from(r.peak))
            * self.classes
            + class;
        usize::from(self.table[idx])
    }

    pub fn k(&self) -> usize {
        self.model.k()
    }
}

/// Nearest-centroid category (0-based).
pub fn assign_category(request: &Request, model: &ClusterModel) -> usize {
    model.nearest(&model.encoding.encode(request))
}

/// Within-cluster sum of squares after every Lloyd iteration.
#[derive(Clone, Debug, Default)]
pub struct KMeansReport {
    pub inertia: Vec<f64>,
    pub iterations: usize,
}

pub fn fit_clusters(requests: &[Request], k: usize, seed: u64) -> Result<ClusterModel, WorkloadError> {
    fit_clusters_with_report(requests, k, seed).map(|(m, _)| m)
}

/// Weighted Lloyd iterations over the distinct encoded points, seeded by k-means++.
/// Equivalent to running on every request since duplicates share an encoding.
pub fn fit_clusters_with_report(
    requests: &[Request],
    k: usize,
    seed: u64,
) -> Result<(ClusterModel, KMeansReport), WorkloadError> {
    if k == 0 {
        return Err(WorkloadError::ZeroClusters);
    }
    let encoding = FeatureEncoding {
        bitrate_max: requests.iter().map(|r| r.bitrate_class).max().unwrap_or(0),
    };
    let mut distinct: BTreeMap<(usize, usize, bool, u8), f64> = BTreeMap::new();
    for r in requests {
        *distinct
            .entry((r.content.index(), r.platform.index(), r.peak, r.bitrate_class))
            .or_default() += 1.0;
    }
    if distinct.len() < k {
        return Err(WorkloadError::TooFewDistinctPoints {
            distinct: distinct.len(),
            k,
        });
    }
    let (points, weights): (Vec<FeatureVector>, Vec<f64>) = distinct
        .iter()
        .map(|(&(c, p, peak, b), &w)| {
            let r = Request {
                cycle: 0,
                location: 0,
                content: ContentCategory::ALL[c],
                platform: Platform::ALL[p],
                peak,
                bitrate_class: b,
            };
            (encoding.encode(&r), w)
        })
        .unzip();

    let mut rng = SimRng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(&points, &weights, k, &mut rng);
    let mut report = KMeansReport::default();
    let mut model = ClusterModel {
        encoding,
        centroids: centroids.clone(),
    };
    for _ in 0..MAX_ITERATIONS {
        let labels: Vec<usize> = points.iter().map(|p| model.nearest(p)).collect();
        let mut sums = vec![[0.0; FEATURE_DIM]; k];
        let mut mass = vec![0.0; k];
        for ((p, &w), &l) in points.iter().zip(&weights).zip(&labels) {
            mass[l] += w;
            for d in 0..FEATURE_DIM {
                sums[l][d] += w * p[d];
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if mass[c] == 0.0 {
                continue; // an empty cluster keeps its centroid
            }
            let mut next = [0.0; FEATURE_DIM];
            for d in 0..FEATURE_DIM {
                next[d] = sums[c][d] / mass[c];
            }
            shift = shift.max(squared_distance(&next, &centroids[c]).sqrt());
            centroids[c] = next;
        }
        model.centroids = centroids.clone();
        report.iterations += 1;
        report.inertia.push(
            points
                .iter()
                .zip(&weights)
                .map(|(p, w)| w * squared_distance(p, &centroids[model.nearest(p)]))
                .sum(),
        );
        if shift <= TOLERANCE {
            break;
        }
    }
    Ok((model, report))
}

fn kmeans_plus_plus(
    points: &[FeatureVector],
    weights: &[f64],
    k: usize,
    rng: &mut SimRng,
) -> Vec<FeatureVector> {
    let sample = |scores: &[f64], rng: &mut SimRng| -> usize {
        let total: f64 = scores.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (i, s) in scores.iter().enumerate() {
            if *s > 0.0 {
                if u < *s {
                    return i;
                }
                u -= s;
            }
        }
        // rounding fallback: last point with positive score
        scores.iter().rposition(|s| *s > 0.0).unwrap_or(0)
    };
    let mut centroids = vec![points[sample(weights, rng)]];
    let mut nearest: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let scores: Vec<f64> = weights.iter().zip(&nearest).map(|(w, d)| w * d).collect();
        let next = points[sample(&scores, rng)];
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &next));
        }
        centroids.push(next);
    }
    centroids
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(content: ContentCategory, platform: Platform, peak: bool, bitrate: u8) -> Request {
        Request {
            cycle: 0,
            location: 0,
            content,
            platform,
            peak,
            bitrate_class: bitrate,
        }
    }

    fn all_points(n: usize) -> Vec<Request> {
        let mut out = Vec::new();
        for c in ContentCategory::ALL {
            for p in Platform::ALL {
                for peak in [false, true] {
                    for b in 0..4 {
                        out.push(req(c, p, peak, b));
                    }
                }
            }
        }
        out.truncate(n);
        out
    }

    fn wcss(points: &[FeatureVector], groups: &[usize]) -> f64 {
        let mut total = 0.0;
        for g in 0..2 {
            let members: Vec<&FeatureVector> = points
                .iter()
                .zip(groups)
                .filter(|(_, l)| **l == g)
                .map(|(p, _)| p)
                .collect();
            if members.is_empty() {
                continue;
            }
            let mut mean = [0.0; FEATURE_DIM];
            for p in &members {
                for d in 0..FEATURE_DIM {
                    mean[d] += p[d] / members.len() as f64;
                }
            }
            total += members.iter().map(|p| squared_distance(p, &mean)).sum::<f64>();
        }
        total
    }

    #[test]
    fn two_separated_pairs() {
        use ContentCategory::*;
        use Platform::*;
        let requests = vec![
            req(CompetitiveGaming, Pc, false, 0),
            req(CompetitiveGaming, Pc, false, 1),
            req(MobileGame, Smartphone, true, 0),
            req(MobileGame, Smartphone, true, 1),
        ];
        let model = fit_clusters(&requests, 2, 3).unwrap();
        let labels: Vec<usize> = requests.iter().map(|r| assign_category(r, &model)).collect();

        // exhaustive oracle over all 2-partitions
        let points: Vec<FeatureVector> = requests.iter().map(|r| model.encoding.encode(r)).collect();
        let mut best = (f64::INFINITY, vec![]);
        for mask in 1u32..(1 << 4) - 1 {
            let groups: Vec<usize> = (0..4).map(|i| ((mask >> i) & 1) as usize).collect();
            let cost = wcss(&points, &groups);
            if cost < best.0 {
                best = (cost, groups);
            }
        }
        let same = |l: &[usize], a: usize, b: usize| l[a] == l[b];
        assert!(same(&labels, 0, 1) && same(&labels, 2, 3) && !same(&labels, 0, 2));
        assert!(same(&best.1, 0, 1) && same(&best.1, 2, 3) && !same(&best.1, 0, 2));
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let requests = all_points(40);
        let model = fit_clusters(&requests, 1, 0).unwrap();
        let mut mean = [0.0; FEATURE_DIM];
        for r in &requests {
            let p = model.encoding.encode(r);
            for d in 0..FEATURE_DIM {
                mean[d] += p[d] / requests.len() as f64;
            }
        }
        for d in 0..FEATURE_DIM {
            assert!((model.centroids[0][d] - mean[d]).abs() < 1e-12);
        }
    }

    #[test]
    fn twenty_nine_distinct_points_fill_twenty_nine_clusters() {
        let mut requests = Vec::new();
        for (i, r) in all_points(29).into_iter().enumerate() {
            for _ in 0..(1 + i % 5) {
                requests.push(r);
            }
        }
        let model = fit_clusters(&requests, 29, 17).unwrap();
        let mut used = vec![false; 29];
        for r in &requests {
            used[assign_category(r, &model)] = true;
        }
        assert!(used.iter().all(|u| *u));
    }

    #[test]
    fn too_few_points() {
        let requests = all_points(3);
        assert!(matches!(
            fit_clusters(&requests, 4, 0),
            Err(WorkloadError::TooFewDistinctPoints { distinct: 3, k: 4 })
        ));
        assert!(matches!(fit_clusters(&requests, 0, 0), Err(WorkloadError::ZeroClusters)));
    }

    #[test]
    fn zero_distance_and_ties() {
        let encoding = FeatureEncoding { bitrate_max: 3 };
        let r = req(ContentCategory::Other, Platform::Web, true, 2);
        let p = encoding.encode(&r);
        let mut far = [5.0; FEATURE_DIM];
        far[0] = -5.0;
        let model = ClusterModel {
            encoding,
            centroids: vec![far, far, p, far],
        };
        assert_eq!(assign_category(&r, &model), 2);

        // equidistant centroids on either side of the point
        let mut left = p;
        let mut right = p;
        left[9] -= 0.25;
        right[9] += 0.25;
        let tie = ClusterModel {
            encoding,
            centroids: vec![left, right],
        };
        assert_eq!(assign_category(&r, &tie), 0);
        assert_eq!(assign_category(&r, &tie), assign_category(&r, &tie));
    }

    #[test]
    fn inertia_never_increases_and_table_agrees() {
        let config = crate::workload::WorkloadConfig {
            horizon: 30,
            ..Default::default()
        };
        let trace = crate::workload::synthesize_trace(&config, 2).unwrap();
        let (model, report) = fit_clusters_with_report(&trace.requests, 8, 5).unwrap();
        for w in report.inertia.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", report.inertia);
        }
        let table = model.category_table();
        for r in trace.requests.iter().take(2000) {
            assert_eq!(table.category(r), assign_category(r, &model));
            // fitted centroids are local optima: each point sits with its nearest centroid
            let p = model.encoding.encode(r);
            let own = squared_distance(&p, &model.centroids[assign_category(r, &model)]);
            assert!(model.centroids.iter().all(|c| squared_distance(&p, c) >= own));
        }
    }
}
