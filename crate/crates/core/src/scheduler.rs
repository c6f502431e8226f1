//! In-cycle stages: match real requests to the pre-schedule, discard
//! low-utilization servers in aggressive mode, and place leftovers.

use crate::prescheduler::PreScheduleStrategy;
use crate::revenue::{RevenueMatrix, ServerFleet};
use crate::workload::{Arrival, CycleDemand};
use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Relative headroom kept by every capacity gate so that loads accumulated
/// one request at a time never exceed `B_e` after floating-point rounding.
pub const CAPACITY_MARGIN: f64 = 1e-9;

/// Symmetric location-to-location distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceModel {
    matrix: Array2<f64>,
}

impl DistanceModel {
    /// Locations on a line: d(m, m') = |m − m'|.
    pub fn line(locations: usize) -> Self {
        Self {
            matrix: Array2::from_shape_fn((locations, locations), |(a, b)| a.abs_diff(b) as f64),
        }
    }

    pub fn from_matrix(matrix: Array2<f64>) -> Result<Self, String> {
        let (r, c) = matrix.dim();
        if r != c {
            return Err(format!("distance matrix is {r}x{c}, expected square"));
        }
        for a in 0..r {
            for b in 0..r {
                let d = matrix[[a, b]];
                if !(d.is_finite() && d >= 0.0) || d != matrix[[b, a]] {
                    return Err(format!("distance ({a}, {b}) is {d}; need finite, non-negative, symmetric"));
                }
            }
        }
        Ok(Self { matrix })
    }

    pub fn locations(&self) -> usize {
        self.matrix.nrows()
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.matrix[[a, b]]
    }
}

/// Per-server state within one cycle.
#[derive(Clone, Debug, PartialEq)]
pub struct ServerState {
    pub bandwidth: f64,
    pub location: usize,
    pub load: f64,
    pub active: bool,
    /// Removed from the cycle by the aggressive filter.
    pub discarded: bool,
}

impl ServerState {
    pub fn remaining(&self) -> f64 {
        (self.bandwidth - self.load).max(0.0)
    }

    pub fn utilization(&self) -> f64 {
        self.load / self.bandwidth
    }

    /// Whether a request of this cost can still be placed here.
    pub fn fits(&self, cost: f64) -> bool {
        self.active && !self.discarded && self.load + cost <= self.bandwidth * (1.0 - CAPACITY_MARGIN)
    }
}

pub fn initial_states(fleet: &ServerFleet) -> Vec<ServerState> {
    fleet
        .servers
        .iter()
        .map(|s| ServerState {
            bandwidth: s.bandwidth,
            location: s.location,
            load: 0.0,
            active: s.active,
            discarded: false,
        })
        .collect()
}

/// Realized placements of one cycle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScheduleAssignment {
    /// Requests served as planned, E × M × N.
    pub matched: Array3<u32>,
    /// Requests placed by re-scheduling, the aggressive filter, or a baseline's
    /// secondary choice, E × M × N.
    pub rescheduled: Array3<u32>,
    /// Requests that no server could take.
    pub dropped: Vec<Arrival>,
    /// Requests the matching stage left for re-scheduling.
    pub leftovers: usize,
    /// Servers discarded by the aggressive filter.
    pub discarded: usize,
}

impl ScheduleAssignment {
    pub fn empty(servers: usize, locations: usize, categories: usize) -> Self {
        Self {
            matched: Array3::zeros((servers, locations, categories)),
            rescheduled: Array3::zeros((servers, locations, categories)),
            dropped: Vec::new(),
            leftovers: 0,
            discarded: 0,
        }
    }

    pub fn matched_total(&self) -> u64 {
        self.matched.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn rescheduled_total(&self) -> u64 {
        self.rescheduled.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn placed_total(&self) -> u64 {
        self.matched_total() + self.rescheduled_total()
    }

    /// Load of server `e`, summed in (m, i) order.
    pub fn load(&self, e: usize, a: &RevenueMatrix) -> f64 {
        let (_, m_count, n_count) = self.matched.dim();
        let mut load = 0.0;
        for m in 0..m_count {
            for i in 0..n_count {
                let c = self.matched[[e, m, i]] + self.rescheduled[[e, m, i]];
                if c > 0 {
                    load += f64::from(c) * a.get(e, m, i);
                }
            }
        }
        load
    }

    pub fn loads(&self, a: &RevenueMatrix) -> Vec<f64> {
        (0..self.matched.dim().0).map(|e| self.load(e, a)).collect()
    }

    /// CSV rows `cycle,e,m,i,count,stage` (1-based indices, non-zero entries).
    pub fn write_csv_rows<W: Write>(&self, cycle: usize, writer: &mut csv::Writer<W>) -> Result<(), csv::Error> {
        for (stage, tensor) in [("matched", &self.matched), ("rescheduled", &self.rescheduled)] {
            for ((e, m, i), &c) in tensor.indexed_iter() {
                if c > 0 {
                    writer.write_record([
                        cycle.to_string(),
                        (e + 1).to_string(),
                        (m + 1).to_string(),
                        (i + 1).to_string(),
                        c.to_string(),
                        stage.to_string(),
                    ])?;
                }
            }
        }
        Ok(())
    }
}

/// Execution stage. For each (m, i) the first `min(r, planned)` arrivals
/// are matched, filling servers in descending order of their planned count
/// (ties: lower id); later arrivals are returned as leftovers in order.
pub fn match_requests(demand: &CycleDemand, ps: &PreScheduleStrategy) -> (ScheduleAssignment, Vec<Arrival>) {
    let (e_count, m_count, n_count) = ps.x.dim();
    let mut out = ScheduleAssignment::empty(e_count, m_count, n_count);
    let mut quota = Array2::<u32>::zeros((m_count, n_count));
    let mut order: Vec<usize> = Vec::with_capacity(e_count);
    for m in 0..m_count {
        for i in 0..n_count {
            let mut left = demand.matrix.counts[[m, i]];
            order.clear();
            order.extend((0..e_count).filter(|&e| ps.x[[e, m, i]] > 0));
            order.sort_by(|&a, &b| ps.x[[b, m, i]].cmp(&ps.x[[a, m, i]]).then(a.cmp(&b)));
            for &e in &order {
                if left == 0 {
                    break;
                }
                let take = left.min(ps.x[[e, m, i]]);
                out.matched[[e, m, i]] = take;
                left -= take;
            }
            quota[[m, i]] = demand.matrix.counts[[m, i]] - left;
        }
    }
    let mut leftovers = Vec::new();
    for &arrival in &demand.arrivals {
        let q = &mut quota[[arrival.m(), arrival.i()]];
        if *q > 0 {
            *q -= 1;
        } else {
            leftovers.push(arrival);
        }
    }
    out.leftovers = leftovers.len();
    (out, leftovers)
}

/// Server states after an assignment: load = Σ s·A, remaining = B − load.
pub fn remaining_bandwidth(fleet: &ServerFleet, assignment: &ScheduleAssignment, a: &RevenueMatrix) -> Vec<ServerState> {
    let mut states = initial_states(fleet);
    for (e, state) in states.iter_mut().enumerate() {
        state.load = assignment.load(e, a);
        if state.load > state.bandwidth {
            log::warn!("server {e} overloaded: load {} > bandwidth {}", state.load, state.bandwidth);
        }
    }
    states
}

/// Closest server with room, then most remaining bandwidth, then lowest id.
fn nearest_with_room(states: &[ServerState], a: &RevenueMatrix, distance: &DistanceModel, r: Arrival) -> Option<usize> {
    let (m, i) = (r.m(), r.i());
    let mut best: Option<(usize, f64, f64)> = None;
    for (e, s) in states.iter().enumerate() {
        if !s.fits(a.get(e, m, i)) {
            continue;
        }
        let d = distance.get(s.location, m);
        let rem = s.remaining();
        let better = match best {
            None => true,
            Some((_, bd, brem)) => d < bd || (d == bd && rem > brem),
        };
        if better {
            best = Some((e, d, rem));
        }
    }
    best.map(|(e, _, _)| e)
}

/// Re-scheduling stage: leftovers in arrival order go to the closest
/// non-discarded server with room, preferring the most remaining bandwidth.
pub fn reschedule(
    leftovers: &[Arrival],
    states: &mut [ServerState],
    assignment: &mut ScheduleAssignment,
    a: &RevenueMatrix,
    distance: &DistanceModel,
) {
    for &r in leftovers {
        match nearest_with_room(states, a, distance, r) {
            Some(e) => {
                states[e].load += a.get(e, r.m(), r.i());
                assignment.rescheduled[[e, r.m(), r.i()]] += 1;
            }
            None => assignment.dropped.push(r),
        }
    }
}

/// Lowest-utilization server passing `admit`, lowest id on ties.
fn least_utilized(states: &[ServerState], admit: impl Fn(usize, &ServerState) -> bool) -> Option<(usize, f64)> {
    states
        .iter()
        .enumerate()
        .filter(|(t, s)| admit(*t, s))
        .fold(None, |best: Option<(usize, f64)>, (t, s)| {
            let u = s.utilization();
            match best {
                Some((_, bu)) if bu <= u => best,
                _ => Some((t, u)),
            }
        })
}

/// Aggressive filter: active servers below `alpha` are discarded for the
/// cycle and their requests re-inserted one at a time on the non-discarded
/// server with the lowest utilization that can take the request without
/// exceeding `beta`, or failing that the lowest-utilization server with room.
/// If every server is below `alpha`, the busiest one (lowest id on ties) is
/// kept as the target. Requests nobody can take are dropped. Returns the
/// number of discarded servers.
pub fn apply_aggressive_filter(
    states: &mut [ServerState],
    assignment: &mut ScheduleAssignment,
    a: &RevenueMatrix,
    alpha: f64,
    beta: f64,
) -> usize {
    if alpha <= 0.0 {
        return 0;
    }
    let low: Vec<usize> = (0..states.len())
        .filter(|&e| states[e].active && states[e].utilization() < alpha)
        .collect();
    if low.is_empty() {
        return 0;
    }
    let any_kept = states
        .iter()
        .enumerate()
        .any(|(e, s)| s.active && !low.contains(&e));
    let keep = if any_kept {
        None
    } else {
        low.iter().copied().fold(None, |best: Option<usize>, e| match best {
            Some(b) if states[b].load >= states[e].load => Some(b),
            _ => Some(e),
        })
    };
    for &e in &low {
        if Some(e) != keep {
            states[e].discarded = true;
        }
    }
    let (_, m_count, n_count) = assignment.matched.dim();
    for &e in &low {
        if Some(e) == keep {
            continue;
        }
        for m in 0..m_count {
            for i in 0..n_count {
                for tensor in [0, 1] {
                    let count = if tensor == 0 {
                        std::mem::take(&mut assignment.matched[[e, m, i]])
                    } else {
                        std::mem::take(&mut assignment.rescheduled[[e, m, i]])
                    };
                    for _ in 0..count {
                        states[e].load -= a.get(e, m, i);
                        let target = least_utilized(states, |t, s| {
                            let cost = a.get(t, m, i);
                            s.fits(cost) && (s.load + cost) / s.bandwidth <= beta
                        })
                        .or_else(|| least_utilized(states, |t, s| s.fits(a.get(t, m, i))));
                        match target {
                            Some((t, _)) => {
                                states[t].load += a.get(t, m, i);
                                assignment.rescheduled[[t, m, i]] += 1;
                            }
                            None => assignment.dropped.push(Arrival::new(m, i)),
                        }
                    }
                }
            }
        }
        states[e].load = 0.0;
    }
    let discarded = states.iter().filter(|s| s.discarded).count();
    assignment.discarded = discarded;
    discarded
}
