//! Comparison schedulers without a prediction stage. Each places the
//! cycle's requests in arrival order behind the same hard capacity gate.

use crate::flow::FlowNetwork;
use crate::revenue::{RevenueMatrix, ServerFleet};
use crate::scheduler::{initial_states, DistanceModel, ScheduleAssignment, ServerState};
use crate::workload::{Arrival, CycleDemand};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

fn place_each(
    demand: &CycleDemand,
    fleet: &ServerFleet,
    a: &RevenueMatrix,
    mut choose: impl FnMut(&[ServerState], Arrival) -> Option<usize>,
) -> ScheduleAssignment {
    let (e_count, m_count, n_count) = a.values().dim();
    let mut out = ScheduleAssignment::empty(e_count, m_count, n_count);
    let mut states = initial_states(fleet);
    for &r in &demand.arrivals {
        match choose(&states, r) {
            Some(e) => {
                states[e].load += a.get(e, r.m(), r.i());
                out.matched[[e, r.m(), r.i()]] += 1;
            }
            None => out.dropped.push(r),
        }
    }
    out
}

/// Nearest server, then most remaining bandwidth, then lowest id.
pub fn schedule_origin(demand: &CycleDemand, fleet: &ServerFleet, a: &RevenueMatrix, distance: &DistanceModel) -> ScheduleAssignment {
    place_each(demand, fleet, a, |states, r| {
        let mut best: Option<(usize, f64, f64)> = None;
        for (e, s) in states.iter().enumerate() {
            if !s.fits(a.get(e, r.m(), r.i())) {
                continue;
            }
            let d = distance.get(s.location, r.m());
            let rem = s.remaining();
            if best.is_none_or(|(_, bd, brem)| d < bd || (d == bd && rem > brem)) {
                best = Some((e, d, rem));
            }
        }
        best.map(|(e, _, _)| e)
    })
}

/// Nearest server with room, lowest id on ties.
pub fn schedule_gp(demand: &CycleDemand, fleet: &ServerFleet, a: &RevenueMatrix, distance: &DistanceModel) -> ScheduleAssignment {
    place_each(demand, fleet, a, |states, r| {
        let mut best: Option<(usize, f64)> = None;
        for (e, s) in states.iter().enumerate() {
            if !s.fits(a.get(e, r.m(), r.i())) {
                continue;
            }
            let d = distance.get(s.location, r.m());
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((e, d));
            }
        }
        best.map(|(e, _)| e)
    })
}

/// Highest request revenue among servers with room, lowest id on ties.
pub fn schedule_greedy(demand: &CycleDemand, fleet: &ServerFleet, a: &RevenueMatrix) -> ScheduleAssignment {
    // candidate order per (m, i) is fixed: sort once, then skip full servers
    let (e_count, m_count, n_count) = a.values().dim();
    let mut ranking: Array2<Vec<usize>> = Array2::from_elem((m_count, n_count), Vec::new());
    for ((m, i), order) in ranking.indexed_iter_mut() {
        order.extend(0..e_count);
        order.sort_by(|&x, &y| a.get(y, m, i).total_cmp(&a.get(x, m, i)).then(x.cmp(&y)));
    }
    place_each(demand, fleet, a, |states, r| {
        ranking[[r.m(), r.i()]]
            .iter()
            .copied()
            .find(|&e| states[e].fits(a.get(e, r.m(), r.i())))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaxFlowConfig {
    /// Cap server nodes at β·B_e; when false the raw bandwidth B_e is used.
    pub beta_capped: bool,
}

impl Default for MaxFlowConfig {
    fn default() -> Self {
        Self { beta_capped: true }
    }
}

/// Max-flow assignment in request units. Arcs: source → (m, i) with the
/// cell's request count; (m, i) → e with the number of such requests that
/// fit in e's cap; e → sink with the cap divided by the demand-weighted mean
/// cost of the requests that can reach e. The integral flow is then extracted
/// request by request in arrival order behind the exact cap. A request whose
/// unit is missing or no longer fits goes to the lowest-id server that still
/// has room under the cap; when none has, it is dropped.
pub fn schedule_maxflow(
    demand: &CycleDemand,
    fleet: &ServerFleet,
    a: &RevenueMatrix,
    beta: f64,
    config: &MaxFlowConfig,
) -> ScheduleAssignment {
    let (e_count, m_count, n_count) = a.values().dim();
    let counts = &demand.matrix.counts;
    let cap: Vec<f64> = fleet
        .servers
        .iter()
        .map(|s| if config.beta_capped { beta * s.bandwidth } else { s.bandwidth })
        .collect();
    let cells: Vec<(usize, usize)> = (0..m_count)
        .flat_map(|m| (0..n_count).map(move |i| (m, i)))
        .filter(|&(m, i)| counts[[m, i]] > 0)
        .collect();

    let source = cells.len() + e_count;
    let sink = source + 1;
    let mut net = FlowNetwork::new(sink + 1);
    for (c, &(m, i)) in cells.iter().enumerate() {
        net.add_edge(source, c, i64::from(counts[[m, i]]));
    }
    let mut arcs = Vec::new();
    for (c, &(m, i)) in cells.iter().enumerate() {
        for e in 0..e_count {
            let cost = a.get(e, m, i);
            if !fleet.servers[e].active {
                continue;
            }
            let units = if cost > 0.0 {
                ((cap[e] / cost).floor() as i64).min(i64::from(counts[[m, i]]))
            } else {
                i64::from(counts[[m, i]])
            };
            if units > 0 {
                arcs.push((c, e, net.add_edge(c, cells.len() + e, units)));
            }
        }
    }
    // mean cost over the demand that can actually reach each server
    let mut weight = vec![0.0; e_count];
    let mut weighted_cost = vec![0.0; e_count];
    for &(c, e, _) in &arcs {
        let (m, i) = cells[c];
        weight[e] += f64::from(counts[[m, i]]);
        weighted_cost[e] += f64::from(counts[[m, i]]) * a.get(e, m, i);
    }
    for e in 0..e_count {
        if !fleet.servers[e].active {
            continue;
        }
        let mean_cost = if weight[e] > 0.0 { weighted_cost[e] / weight[e] } else { 0.0 };
        let units = if mean_cost > 0.0 {
            (cap[e] / mean_cost).floor() as i64
        } else {
            i64::from(u32::MAX)
        };
        net.add_edge(cells.len() + e, sink, units);
    }
    let routed = net.max_flow(source, sink);
    log::trace!("maxflow: routed {routed} of {} requests", demand.total());

    let mut units: Array2<i64> = Array2::zeros((cells.len(), e_count));
    for &(c, e, id) in &arcs {
        units[[c, e]] = net.flow(id);
    }
    let mut cell_index = Array2::from_elem((m_count, n_count), usize::MAX);
    for (c, &(m, i)) in cells.iter().enumerate() {
        cell_index[[m, i]] = c;
    }
    let mut load = vec![0.0; e_count];
    let mut out = ScheduleAssignment::empty(e_count, m_count, n_count);
    let mut states = initial_states(fleet);
    for &r in &demand.arrivals {
        let c = cell_index[[r.m(), r.i()]];
        let cost = |e: usize| a.get(e, r.m(), r.i());
        let within = |e: usize, load: &[f64]| {
            fleet.servers[e].active && load[e] + cost(e) <= cap[e] && states[e].fits(cost(e))
        };
        let planned = (0..e_count).find(|&e| units[[c, e]] > 0 && within(e, &load));
        // the mean-cost sink arcs can misjudge a server, so place a request
        // whose flow unit no longer fits on any server with room under the cap
        let pick = planned.or_else(|| (0..e_count).find(|&e| within(e, &load)));
        match pick {
            Some(e) => {
                if planned.is_some() {
                    units[[c, e]] -= 1;
                }
                load[e] += cost(e);
                states[e].load = load[e];
                out.matched[[e, r.m(), r.i()]] += 1;
            }
            None => out.dropped.push(r),
        }
    }
    out
}

/// Which scheduler drives a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    #[default]
    Seer,
    Origin,
    Gp,
    Greedy,
    Maxflow,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 5] = [
        SchedulerKind::Seer,
        SchedulerKind::Origin,
        SchedulerKind::Gp,
        SchedulerKind::Greedy,
        SchedulerKind::Maxflow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchedulerKind::Seer => "seer",
            SchedulerKind::Origin => "origin",
            SchedulerKind::Gp => "gp",
            SchedulerKind::Greedy => "greedy",
            SchedulerKind::Maxflow => "maxflow",
        }
    }
}

impl std::fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SchedulerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown scheduler `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::RequestMatrix;
    use proptest::prelude::*;

    fn arrivals(list: &[(usize, usize)], m: usize, n: usize) -> CycleDemand {
        let mut matrix = RequestMatrix::zeros(0, m, n);
        let arrivals: Vec<Arrival> = list.iter().map(|&(a, b)| Arrival::new(a, b)).collect();
        for r in &arrivals {
            matrix.counts[[r.m(), r.i()]] += 1;
        }
        CycleDemand { matrix, arrivals }
    }

    fn unit(e: usize, m: usize, n: usize) -> RevenueMatrix {
        RevenueMatrix::from_fn(e, m, n, |_, _, _| 1.0).unwrap()
    }

    #[test]
    fn origin_rules() {
        let fleet = ServerFleet::from_parts(&[100.0], &[0]).unwrap();
        let d = arrivals(&[(0, 0), (1, 0), (0, 0)], 2, 1);
        let s = schedule_origin(&d, &fleet, &unit(1, 2, 1), &DistanceModel::line(2));
        assert_eq!(s.matched_total(), 3);

        let fleet = ServerFleet::from_parts(&[5.0, 9.0], &[0, 0]).unwrap();
        let s = schedule_origin(&arrivals(&[(0, 0)], 1, 1), &fleet, &unit(2, 1, 1), &DistanceModel::line(1));
        assert_eq!(s.matched[[1, 0, 0]], 1);

        let empty = schedule_origin(&arrivals(&[], 1, 1), &fleet, &unit(2, 1, 1), &DistanceModel::line(1));
        assert_eq!(empty.placed_total(), 0);
    }

    #[test]
    fn gp_rules() {
        let fleet = ServerFleet::from_parts(&[10.0, 10.0, 10.0], &[2, 0, 1]).unwrap();
        let a = unit(3, 3, 1);
        let dist = DistanceModel::line(3);
        let s = schedule_gp(&arrivals(&[(0, 0)], 3, 1), &fleet, &a, &dist);
        assert_eq!(s.matched[[1, 0, 0]], 1);
        // nearest server full after 9 unit requests (capacity margin), next-nearest takes the next
        let many: Vec<(usize, usize)> = vec![(0, 0); 10];
        let s = schedule_gp(&arrivals(&many, 3, 1), &fleet, &a, &dist);
        assert_eq!(s.matched[[1, 0, 0]], 9);
        assert_eq!(s.matched[[2, 0, 0]], 1);
    }

    #[test]
    fn greedy_rules() {
        let fleet = ServerFleet::from_parts(&[100.0, 100.0], &[0, 0]).unwrap();
        let a = RevenueMatrix::from_fn(2, 1, 1, |e, _, _| if e == 0 { 2.0 } else { 5.0 }).unwrap();
        let s = schedule_greedy(&arrivals(&[(0, 0)], 1, 1), &fleet, &a);
        assert_eq!(s.matched[[1, 0, 0]], 1);
        let fleet = ServerFleet::from_parts(&[100.0, 6.0], &[0, 0]).unwrap();
        let s = schedule_greedy(&arrivals(&[(0, 0), (0, 0)], 1, 1), &fleet, &a);
        assert_eq!((s.matched[[1, 0, 0]], s.matched[[0, 0, 0]]), (1, 1));
        assert_eq!(schedule_greedy(&arrivals(&[], 1, 1), &fleet, &a).placed_total(), 0);
    }

    #[test]
    fn maxflow_examples() {
        let fleet = ServerFleet::from_parts(&[100.0], &[0]).unwrap();
        let d = arrivals(&[(0, 0); 5], 1, 1);
        let s = schedule_maxflow(&d, &fleet, &unit(1, 1, 1), 0.8, &MaxFlowConfig::default());
        assert_eq!(s.matched_total(), 5);

        // two servers with β·B = 1.0 and two unit requests: one each
        let fleet = ServerFleet::from_parts(&[1.25, 1.25], &[0, 0]).unwrap();
        let d = arrivals(&[(0, 0), (0, 0)], 1, 1);
        let s = schedule_maxflow(&d, &fleet, &unit(2, 1, 1), 0.8, &MaxFlowConfig::default());
        assert_eq!(s.matched.iter().copied().collect::<Vec<_>>(), vec![1, 1]);
        assert!(s.dropped.is_empty());

        let s = schedule_maxflow(&arrivals(&[], 1, 1), &fleet, &unit(2, 1, 1), 0.8, &MaxFlowConfig::default());
        assert_eq!(s.placed_total(), 0);
    }

    /// Largest number of requests that fit, by enumeration over servers.
    fn best_count(cells: &[u32], costs: &[Vec<f64>], caps: &[f64]) -> u32 {
        fn go(k: usize, cells: &[u32], costs: &[Vec<f64>], load: &mut Vec<f64>, caps: &[f64], placed: u32, left: u32, best: &mut u32) {
            if k == cells.len() {
                *best = (*best).max(placed);
                return;
            }
            if left == 0 {
                go(k + 1, cells, costs, load, caps, placed, cells.get(k + 1).copied().unwrap_or(0), best);
                return;
            }
            // this request is skipped, or placed on one of the servers
            go(k, cells, costs, load, caps, placed, left - 1, best);
            for e in 0..caps.len() {
                if load[e] + costs[k][e] <= caps[e] + 1e-12 {
                    load[e] += costs[k][e];
                    go(k, cells, costs, load, caps, placed + 1, left - 1, best);
                    load[e] -= costs[k][e];
                }
            }
        }
        let mut best = 0;
        go(0, cells, costs, &mut vec![0.0; caps.len()], caps, 0, cells[0], &mut best);
        best
    }

    proptest! {
        #[test]
        fn baselines_conserve_and_respect_capacity(
            list in prop::collection::vec((0usize..3, 0usize..2), 0..40),
            b in prop::collection::vec(1.0f64..12.0, 1..4),
            costs in prop::collection::vec(0.2f64..3.0, 18),
        ) {
            let e_count = b.len();
            let locs: Vec<usize> = (0..e_count).map(|e| e % 3).collect();
            let fleet = ServerFleet::from_parts(&b, &locs).unwrap();
            let a = RevenueMatrix::from_fn(e_count, 3, 2, |e, m, i| costs[e * 6 + m * 2 + i]).unwrap();
            let d = arrivals(&list, 3, 2);
            let dist = DistanceModel::line(3);
            for s in [
                schedule_origin(&d, &fleet, &a, &dist),
                schedule_gp(&d, &fleet, &a, &dist),
                schedule_greedy(&d, &fleet, &a),
                schedule_maxflow(&d, &fleet, &a, 0.8, &MaxFlowConfig::default()),
            ] {
                prop_assert_eq!(s.placed_total() as usize + s.dropped.len(), list.len());
                for (e, load) in s.loads(&a).iter().enumerate() {
                    prop_assert!(*load <= fleet.servers[e].bandwidth);
                }
            }
            let mf = schedule_maxflow(&d, &fleet, &a, 0.8, &MaxFlowConfig::default());
            for (e, load) in mf.loads(&a).iter().enumerate() {
                prop_assert!(*load <= 0.8 * fleet.servers[e].bandwidth + 1e-9);
            }
        }

        #[test]
        fn maxflow_beats_single_greedy_on_unit_costs(
            cells in prop::collection::vec(0u32..4, 2),
            caps in prop::collection::vec(1u32..4, 2),
            allowed in prop::collection::vec(any::<bool>(), 4),
        ) {
            // unit costs; a disallowed (cell, server) pair gets a cost above any cap
            let fleet = ServerFleet::from_parts(&caps.iter().map(|&c| f64::from(c) / 0.8 + 1e-6).collect::<Vec<_>>(), &[0, 0]).unwrap();
            let a = RevenueMatrix::from_fn(2, 1, 2, |e, _, i| if allowed[i * 2 + e] { 1.0 } else { 100.0 }).unwrap();
            let mut list = Vec::new();
            for (i, &c) in cells.iter().enumerate() {
                list.extend(std::iter::repeat_n((0, i), c as usize));
            }
            let d = arrivals(&list, 1, 2);
            let mf = schedule_maxflow(&d, &fleet, &a, 0.8, &MaxFlowConfig::default());
            let costs: Vec<Vec<f64>> = (0..2).map(|i| (0..2).map(|e| a.get(e, 0, i)).collect()).collect();
            let caps_f: Vec<f64> = caps.iter().map(|&c| f64::from(c)).collect();
            let best = best_count(&cells, &costs, &caps_f);
            prop_assert_eq!(mf.placed_total() as u32, best);
            let greedy = schedule_greedy(&d, &fleet, &a);
            let greedy_limited = greedy.loads(&a).iter().zip(&caps_f).all(|(l, c)| *l <= *c + 1e-9);
            if greedy_limited {
                prop_assert!(mf.placed_total() >= greedy.placed_total());
            }
        }
    }
}
