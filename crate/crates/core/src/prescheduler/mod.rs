//! Pre-scheduling: reduce the planning problem over locations, solve the
//! relaxed LP, then round and expand the fractional plan back to a per
//! (server, location, category) request count tensor.

mod rounding;

pub use rounding::{apportion, controlled_round};

use crate::lp::{self, LinearProgram, LpError};
use crate::revenue::{RevenueCurveParams, RevenueMatrix, ServerFleet};
use crate::workload::RequestMatrix;
use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::time::{Duration, Instant};
use thiserror::Error;

/// Strict utilization bounds are realized as closed bounds shrunk by this margin.
pub const BOUND_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Every participating server must stay above the withdrawal utilization.
    #[default]
    Conservative,
    /// Low-utilization servers may be left empty.
    Aggressive,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conservative" => Ok(Mode::Conservative),
            "aggressive" => Ok(Mode::Aggressive),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Conservative => "conservative",
            Mode::Aggressive => "aggressive",
        })
    }
}

/// How the location axis of A is collapsed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Plain mean over locations.
    Uniform,
    /// Mean weighted by each location's predicted share of the category;
    /// falls back to the plain mean for categories without predicted demand.
    #[default]
    DemandWeighted,
}

/// How a server's per-category count is split across locations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionRule {
    /// Location shares of the category itself, rounded jointly so every
    /// (location, category) cell receives exactly its predicted count.
    #[default]
    PerCategory,
    /// Location shares of all predicted requests, independent of category.
    Total,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreschedulerConfig {
    pub averaging: Averaging,
    pub expansion: ExpansionRule,
    /// Move single requests off servers that rounding pushed outside the
    /// utilization band.
    pub repair: bool,
}

impl Default for PreschedulerConfig {
    fn default() -> Self {
        Self {
            averaging: Averaging::DemandWeighted,
            expansion: ExpansionRule::PerCategory,
            repair: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum Infeasibility {
    #[error("predicted demand {demand} exceeds the fleet's planning capacity {capacity:.3}")]
    DemandExceedsCapacity { demand: f64, capacity: f64 },
    #[error("predicted demand {demand} is below the withdrawal floor {floor:.3}")]
    DemandBelowWithdrawalFloor { demand: f64, floor: f64 },
    #[error("no feasible plan (phase-1 residual {residual:.3e})")]
    Residual { residual: f64 },
}

#[derive(Debug, Error)]
pub enum PrescheduleError {
    #[error(transparent)]
    Infeasible(#[from] Infeasibility),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("solver failure: {0}")]
    Solver(LpError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// The location-free planning problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedProblem {
    /// E × N averaged revenue.
    pub a_bar: Array2<f64>,
    /// Predicted requests per category.
    pub r_bar: Vec<f64>,
    pub bandwidth: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub mode: Mode,
    /// Servers that take part in the plan.
    pub participating: Vec<bool>,
}

impl ReducedProblem {
    pub fn servers(&self) -> usize {
        self.bandwidth.len()
    }

    pub fn categories(&self) -> usize {
        self.r_bar.len()
    }

    /// Utilization bounds of a participating server.
    pub fn bounds(&self) -> (f64, f64) {
        let lower = if self.mode == Mode::Conservative && self.alpha > 0.0 {
            self.alpha + BOUND_EPS
        } else {
            0.0
        };
        (lower, self.beta - BOUND_EPS)
    }
}

/// Collapses the location axis. In aggressive mode, servers that could not
/// reach `alpha` even by taking the whole predicted demand are excluded.
pub fn reduce_problem(
    predicted: &RequestMatrix,
    a: &RevenueMatrix,
    fleet: &ServerFleet,
    params: &RevenueCurveParams,
    mode: Mode,
    averaging: Averaging,
) -> Result<ReducedProblem, PrescheduleError> {
    let (e_count, m_count, n_count) = a.values().dim();
    if fleet.len() != e_count
        || predicted.locations() != m_count
        || predicted.categories() != n_count
    {
        return Err(PrescheduleError::Shape(format!(
            "A is {e_count}x{m_count}x{n_count}, fleet has {} servers, prediction is {}x{}",
            fleet.len(),
            predicted.locations(),
            predicted.categories()
        )));
    }
    let r_bar: Vec<f64> = predicted.category_totals().iter().map(|&c| c as f64).collect();
    let mut a_bar = Array2::zeros((e_count, n_count));
    for i in 0..n_count {
        let weighted = averaging == Averaging::DemandWeighted && r_bar[i] > 0.0;
        for e in 0..e_count {
            a_bar[[e, i]] = if weighted {
                (0..m_count)
                    .map(|m| a.get(e, m, i) * f64::from(predicted.counts[[m, i]]))
                    .sum::<f64>()
                    / r_bar[i]
            } else {
                (0..m_count).map(|m| a.get(e, m, i)).sum::<f64>() / m_count as f64
            };
        }
    }
    let bandwidth = fleet.bandwidths();
    let mut participating = fleet.active_mask();
    if mode == Mode::Aggressive && params.alpha > 0.0 {
        for e in 0..e_count {
            let reachable: f64 = (0..n_count).map(|i| r_bar[i] * a_bar[[e, i]]).sum::<f64>()
                / bandwidth[e];
            if reachable.min(params.beta) < params.alpha {
                participating[e] = false;
            }
        }
    }
    Ok(ReducedProblem {
        a_bar,
        r_bar,
        bandwidth,
        alpha: params.alpha,
        beta: params.beta,
        mode,
        participating,
    })
}

/// Optimal fractional plan x̄ (E × N).
#[derive(Clone, Debug, PartialEq)]
pub struct FractionalStrategy {
    pub x_bar: Array2<f64>,
    pub objective: f64,
    pub iterations: usize,
}

fn diagnose(problem: &ReducedProblem, residual: f64) -> Infeasibility {
    let (lower, upper) = problem.bounds();
    let demand: f64 = problem.r_bar.iter().sum();
    let servers = (0..problem.servers()).filter(|&e| problem.participating[e]);
    let mut capacity = 0.0;
    let mut floor = 0.0;
    for e in servers {
        let row = problem.a_bar.row(e);
        let cheapest = row.iter().copied().fold(f64::INFINITY, f64::min);
        let dearest = row.iter().copied().fold(0.0, f64::max);
        capacity += if cheapest > 0.0 {
            upper * problem.bandwidth[e] / cheapest
        } else {
            f64::INFINITY
        };
        floor += if dearest > 0.0 {
            lower * problem.bandwidth[e] / dearest
        } else if lower > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
    }
    if demand > capacity {
        Infeasibility::DemandExceedsCapacity { demand, capacity }
    } else if demand < floor {
        Infeasibility::DemandBelowWithdrawalFloor { demand, floor }
    } else {
        Infeasibility::Residual { residual }
    }
}

pub fn solve_lp(problem: &ReducedProblem) -> Result<FractionalStrategy, PrescheduleError> {
    let (e_count, n_count) = problem.a_bar.dim();
    let (lower, upper) = problem.bounds();
    let mut program = LinearProgram::default();
    let mut var = Array2::from_elem((e_count, n_count), usize::MAX);
    let servers: Vec<usize> = (0..e_count).filter(|&e| problem.participating[e]).collect();
    for &e in &servers {
        for i in 0..n_count {
            var[[e, i]] = program.add_var(
                problem.a_bar[[e, i]] / problem.bandwidth[e],
                0.0,
                f64::INFINITY,
            );
        }
    }
    for &e in &servers {
        let util = program.add_var(0.0, lower, upper);
        let mut coeffs: Vec<(usize, f64)> = (0..n_count)
            .map(|i| (var[[e, i]], problem.a_bar[[e, i]] / problem.bandwidth[e]))
            .collect();
        coeffs.push((util, -1.0));
        program.add_row(coeffs, 0.0);
    }
    for i in 0..n_count {
        let coeffs = servers.iter().map(|&e| (var[[e, i]], 1.0)).collect();
        program.add_row(coeffs, problem.r_bar[i]);
    }
    let solution = match lp::solve(&program) {
        Ok(s) => s,
        Err(LpError::Infeasible { residual }) => return Err(diagnose(problem, residual).into()),
        Err(other) => return Err(PrescheduleError::Solver(other)),
    };
    let mut x_bar = Array2::zeros((e_count, n_count));
    for &e in &servers {
        for i in 0..n_count {
            x_bar[[e, i]] = solution.x[var[[e, i]]].max(0.0);
        }
    }
    Ok(FractionalStrategy {
        x_bar,
        objective: solution.objective,
        iterations: solution.iterations,
    })
}

/// Planned request counts x[e][m][i] for one cycle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreScheduleStrategy {
    pub cycle: usize,
    pub x: Array3<u32>,
}

impl PreScheduleStrategy {
    pub fn zeros(cycle: usize, servers: usize, locations: usize, categories: usize) -> Self {
        Self {
            cycle,
            x: Array3::zeros((servers, locations, categories)),
        }
    }

    pub fn planned_load(&self, e: usize, a: &RevenueMatrix) -> f64 {
        let mut load = 0.0;
        for ((m, i), &c) in self.x.index_axis(ndarray::Axis(0), e).indexed_iter() {
            if c > 0 {
                load += f64::from(c) * a.get(e, m, i);
            }
        }
        load
    }

    pub fn planned_utilization(&self, a: &RevenueMatrix, fleet: &ServerFleet) -> Vec<f64> {
        (0..fleet.len())
            .map(|e| self.planned_load(e, a) / fleet.servers[e].bandwidth)
            .collect()
    }

    /// Planned count per (location, category) summed over servers.
    pub fn cell_totals(&self) -> Array2<u32> {
        self.x.sum_axis(ndarray::Axis(0))
    }

    pub fn total(&self) -> u64 {
        self.x.iter().map(|&c| u64::from(c)).sum()
    }

    /// CSV `cycle,e,m,i,count` of the non-zero entries, 1-based indices.
    pub fn write_csv_rows<W: Write>(&self, writer: &mut csv::Writer<W>) -> Result<(), csv::Error> {
        for ((e, m, i), &c) in self.x.indexed_iter() {
            if c > 0 {
                writer.write_record([
                    self.cycle.to_string(),
                    (e + 1).to_string(),
                    (m + 1).to_string(),
                    (i + 1).to_string(),
                    c.to_string(),
                ])?;
            }
        }
        Ok(())
    }
}

/// Worst-case utilization shift of server `e` caused by integerization:
/// one request per category from server-level rounding, plus the spread of
/// A across locations for up to M/2 requests moved by the location split.
pub fn rounding_slack(a: &RevenueMatrix, fleet: &ServerFleet, e: usize) -> f64 {
    let (_, m_count, n_count) = a.values().dim();
    let mut slack = 0.0;
    for i in 0..n_count {
        let col: Vec<f64> = (0..m_count).map(|m| a.get(e, m, i)).collect();
        let hi = col.iter().copied().fold(0.0, f64::max);
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = col.iter().sum::<f64>() / m_count as f64;
        slack += mean.max(hi) + (m_count as f64 / 2.0) * (hi - lo);
    }
    slack / fleet.servers[e].bandwidth
}

/// Server-level integer counts: every category's predicted total is
/// apportioned over servers by largest remainder of x̄.
fn round_servers(fractional: &FractionalStrategy, problem: &ReducedProblem) -> Array2<u32> {
    let (e_count, n_count) = fractional.x_bar.dim();
    let mut counts = Array2::zeros((e_count, n_count));
    for i in 0..n_count {
        let total = problem.r_bar[i].round() as u32;
        let weights: Vec<f64> = fractional.x_bar.column(i).to_vec();
        for (e, c) in apportion(total, &weights).into_iter().enumerate() {
            counts[[e, i]] = c;
        }
    }
    counts
}

fn expand(
    server_counts: &Array2<u32>,
    predicted: &RequestMatrix,
    rule: ExpansionRule,
    cycle: usize,
) -> PreScheduleStrategy {
    let (e_count, n_count) = server_counts.dim();
    let m_count = predicted.locations();
    let mut ps = PreScheduleStrategy::zeros(cycle, e_count, m_count, n_count);
    match rule {
        ExpansionRule::PerCategory => {
            for i in 0..n_count {
                let rows: Vec<u32> = server_counts.column(i).to_vec();
                let cols: Vec<u32> = predicted.counts.column(i).to_vec();
                let y = controlled_round(&rows, &cols);
                for ((e, m), &v) in y.indexed_iter() {
                    ps.x[[e, m, i]] = v;
                }
            }
        }
        ExpansionRule::Total => {
            let shares: Vec<f64> = predicted.location_totals().iter().map(|&t| t as f64).collect();
            for ((e, i), &count) in server_counts.indexed_iter() {
                for (m, v) in apportion(count, &shares).into_iter().enumerate() {
                    ps.x[[e, m, i]] = v;
                }
            }
        }
    }
    ps
}

/// Moves single planned requests so that every participating server ends up
/// inside its utilization band where possible.
///
/// Overloaded servers shed their cheapest request to the server with the
/// best revenue ratio that still has room; requests nobody can take are
/// removed from the plan and arrive as leftovers. In conservative mode,
/// servers below the floor then pull requests from servers that stay above
/// their own floor after giving one up.
fn repair(ps: &mut PreScheduleStrategy, a: &RevenueMatrix, problem: &ReducedProblem) {
    let (e_count, m_count, n_count) = ps.x.dim();
    // the revenue curve's middle branch is closed, so the integer plan may
    // sit exactly on a threshold
    let (lower, _) = problem.bounds();
    let lower = if lower > 0.0 { problem.alpha } else { 0.0 };
    let b = &problem.bandwidth;
    let over = |e: usize, load: f64| load / b[e] > problem.beta;
    let under = |e: usize, load: f64| load / b[e] < lower;
    let mut load: Vec<f64> = (0..e_count).map(|e| ps.planned_load(e, a)).collect();
    let servers: Vec<usize> = (0..e_count).filter(|&e| problem.participating[e]).collect();

    for &e in &servers {
        while over(e, load[e]) {
            let mut cell: Option<(usize, usize)> = None;
            for m in 0..m_count {
                for i in 0..n_count {
                    if ps.x[[e, m, i]] > 0
                        && cell.is_none_or(|(bm, bi)| a.get(e, m, i) < a.get(e, bm, bi))
                    {
                        cell = Some((m, i));
                    }
                }
            }
            let Some((m, i)) = cell else { break };
            ps.x[[e, m, i]] -= 1;
            load[e] -= a.get(e, m, i);
            let target = servers
                .iter()
                .copied()
                .filter(|&t| t != e && !over(t, load[t] + a.get(t, m, i)))
                .fold(None, |best: Option<usize>, t| {
                    let ratio = a.get(t, m, i) / problem.bandwidth[t];
                    match best {
                        Some(b) if a.get(b, m, i) / problem.bandwidth[b] >= ratio => Some(b),
                        _ => Some(t),
                    }
                });
            if let Some(t) = target {
                ps.x[[t, m, i]] += 1;
                load[t] += a.get(t, m, i);
            }
        }
    }

    if lower <= 0.0 {
        return;
    }
    for &e in &servers {
        while under(e, load[e]) {
            // cell whose request adds the most load here, taken from the
            // lowest-id donor that stays above its own floor
            let mut best: Option<(usize, usize, usize)> = None;
            for m in 0..m_count {
                for i in 0..n_count {
                    if over(e, load[e] + a.get(e, m, i)) {
                        continue;
                    }
                    if best.is_some_and(|(_, bm, bi)| a.get(e, m, i) <= a.get(e, bm, bi)) {
                        continue;
                    }
                    let donor = servers.iter().copied().find(|&d| {
                        d != e && ps.x[[d, m, i]] > 0 && !under(d, load[d] - a.get(d, m, i))
                    });
                    if let Some(d) = donor {
                        best = Some((d, m, i));
                    }
                }
            }
            let Some((d, m, i)) = best else { break };
            ps.x[[d, m, i]] -= 1;
            load[d] -= a.get(d, m, i);
            ps.x[[e, m, i]] += 1;
            load[e] += a.get(e, m, i);
        }
    }
}

/// Rounds x̄ per category, splits across locations, then repairs the band.
pub fn round_and_expand(
    fractional: &FractionalStrategy,
    problem: &ReducedProblem,
    predicted: &RequestMatrix,
    a: &RevenueMatrix,
    config: &PreschedulerConfig,
) -> PreScheduleStrategy {
    let counts = round_servers(fractional, problem);
    let mut ps = expand(&counts, predicted, config.expansion, predicted.cycle);
    if config.repair {
        repair(&mut ps, a, problem);
    }
    ps
}

/// Capacity-proportional plan capped at β·B_e, used when the LP is infeasible.
fn fallback(problem: &ReducedProblem) -> Array2<u32> {
    let (e_count, n_count) = problem.a_bar.dim();
    let (_, upper) = problem.bounds();
    let servers: Vec<usize> = (0..e_count).filter(|&e| problem.participating[e]).collect();
    let total_b: f64 = servers.iter().map(|&e| problem.bandwidth[e]).sum();
    let mut counts = Array2::zeros((e_count, n_count));
    if total_b <= 0.0 {
        return counts;
    }
    for &e in &servers {
        let share = problem.bandwidth[e] / total_b;
        let load: f64 = (0..n_count).map(|i| share * problem.r_bar[i] * problem.a_bar[[e, i]]).sum();
        let scale = if load > 0.0 {
            (upper * problem.bandwidth[e] / load).min(1.0)
        } else {
            1.0
        };
        for i in 0..n_count {
            counts[[e, i]] = (share * problem.r_bar[i] * scale).floor() as u32;
        }
    }
    counts
}

#[derive(Clone, Debug)]
pub struct PrescheduleOutcome {
    pub strategy: PreScheduleStrategy,
    /// LP objective (sum of planned utilizations), `None` on fallback.
    pub objective: Option<f64>,
    pub iterations: usize,
    /// Set when the LP was infeasible and the fallback plan was used.
    pub infeasibility: Option<Infeasibility>,
    pub solve_time: Duration,
}

impl PrescheduleOutcome {
    pub fn fallback(&self) -> bool {
        self.infeasibility.is_some()
    }
}

/// reduce → solve → round and expand, with the proportional fallback on
/// infeasible cycles.
pub fn preschedule(
    predicted: &RequestMatrix,
    a: &RevenueMatrix,
    fleet: &ServerFleet,
    params: &RevenueCurveParams,
    mode: Mode,
    config: &PreschedulerConfig,
) -> Result<PrescheduleOutcome, PrescheduleError> {
    let start = Instant::now();
    let problem = reduce_problem(predicted, a, fleet, params, mode, config.averaging)?;
    let (strategy, objective, iterations, infeasibility) = match solve_lp(&problem) {
        Ok(fractional) => {
            let ps = round_and_expand(&fractional, &problem, predicted, a, config);
            (ps, Some(fractional.objective), fractional.iterations, None)
        }
        Err(PrescheduleError::Infeasible(reason)) => {
            log::debug!("cycle {}: {reason}; using proportional fallback", predicted.cycle);
            let counts = fallback(&problem);
            let mut ps = expand(&counts, predicted, ExpansionRule::PerCategory, predicted.cycle);
            if config.repair {
                repair(&mut ps, a, &problem);
            }
            (ps, None, 0, Some(reason))
        }
        Err(other) => return Err(other),
    };
    Ok(PrescheduleOutcome {
        strategy,
        objective,
        iterations,
        infeasibility,
        solve_time: start.elapsed(),
    })
}
