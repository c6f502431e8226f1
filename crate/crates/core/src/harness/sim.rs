use super::config::{BetaPolicy, SimulationConfig};
use super::qos::qos_sample;
use super::scenario::Scenario;
use super::HarnessError;
use crate::baselines::{schedule_greedy, schedule_gp, schedule_maxflow, schedule_origin, SchedulerKind};
use crate::prescheduler::{preschedule, Mode, PreScheduleStrategy};
use crate::revenue::{estimate_beta, QosSample};
use crate::revenue::server_revenue;
use crate::rng::indexed_stream;
use crate::scheduler::{apply_aggressive_filter, match_requests, remaining_bandwidth, reschedule, ScheduleAssignment};
use crate::workload::CycleDemand;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// One recorded cycle. Utilizations are indexed by server; inactive servers
/// report 0 and are excluded from every aggregate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleMetrics {
    pub cycle: usize,
    pub requests: u64,
    pub matched: u64,
    pub rescheduled: u64,
    pub leftovers: u64,
    pub dropped: u64,
    pub discarded: u64,
    pub active: u64,
    pub revenue: f64,
    pub mean_utilization: f64,
    pub max_utilization: f64,
    pub withdrawals: u64,
    pub sla_violations: u64,
    /// β the plan for this cycle was built with.
    pub beta: f64,
    pub fallback: bool,
    pub mean_latency: f64,
    pub mean_error_rate: f64,
    #[serde(skip)]
    pub utilization: Vec<f64>,
    #[serde(skip)]
    pub preschedule_ms: f64,
    #[serde(skip)]
    pub in_cycle_ms: f64,
}

/// What an observer sees after each cycle.
pub struct CycleView<'a> {
    pub cycle: usize,
    pub demand: &'a CycleDemand,
    pub plan: Option<&'a PreScheduleStrategy>,
    pub assignment: &'a ScheduleAssignment,
    pub metrics: &'a CycleMetrics,
    pub active: &'a [bool],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scheduler: SchedulerKind,
    pub mode: Mode,
    pub seed: u64,
    pub cycles: usize,
    pub total_revenue: f64,
    pub mean_revenue: f64,
    pub mean_utilization: f64,
    /// Withdrawal events per active server-cycle.
    pub withdrawal_rate: f64,
    /// Fraction of cycles with at least one withdrawal event.
    pub withdrawal_cycle_rate: f64,
    /// SLA violations per active server-cycle.
    pub sla_rate: f64,
    /// Fraction of cycles with at least one SLA violation.
    pub sla_cycle_rate: f64,
    pub requests: u64,
    pub matched: u64,
    pub rescheduled: u64,
    pub leftovers: u64,
    pub dropped: u64,
    pub fallback_cycles: usize,
    pub final_beta: f64,
    pub median_preschedule_ms: f64,
    pub median_in_cycle_ms: f64,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl Summary {
    pub fn from_metrics(config: &SimulationConfig, metrics: &[CycleMetrics]) -> Self {
        let n = metrics.len();
        let per = |x: f64| if n == 0 { 0.0 } else { x / n as f64 };
        let server_cycles: u64 = metrics.iter().map(|m| m.active).sum();
        let rate = |x: u64| if server_cycles == 0 { 0.0 } else { x as f64 / server_cycles as f64 };
        let total_revenue = metrics.iter().fold(0.0, |acc, m| acc + m.revenue);
        let sum_u = |f: fn(&CycleMetrics) -> u64| metrics.iter().map(f).sum::<u64>();
        let timings = |f: fn(&CycleMetrics) -> f64| metrics.iter().map(f).collect::<Vec<_>>();
        Self {
            scheduler: config.scheduler,
            mode: config.mode,
            seed: config.seed,
            cycles: n,
            total_revenue,
            mean_revenue: per(total_revenue),
            mean_utilization: per(metrics.iter().map(|m| m.mean_utilization).sum()),
            withdrawal_rate: rate(sum_u(|m| m.withdrawals)),
            withdrawal_cycle_rate: per(metrics.iter().filter(|m| m.withdrawals > 0).count() as f64),
            sla_rate: rate(sum_u(|m| m.sla_violations)),
            sla_cycle_rate: per(metrics.iter().filter(|m| m.sla_violations > 0).count() as f64),
            requests: sum_u(|m| m.requests),
            matched: sum_u(|m| m.matched),
            rescheduled: sum_u(|m| m.rescheduled),
            leftovers: sum_u(|m| m.leftovers),
            dropped: sum_u(|m| m.dropped),
            fallback_cycles: metrics.iter().filter(|m| m.fallback).count(),
            final_beta: metrics.last().map_or(config.revenue.beta, |m| m.beta),
            median_preschedule_ms: median(&timings(|m| m.preschedule_ms)),
            median_in_cycle_ms: median(&timings(|m| m.in_cycle_ms)),
        }
    }
}

pub struct RunOutput {
    pub metrics: Vec<CycleMetrics>,
    pub summary: Summary,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

pub fn run_simulation(config: &SimulationConfig) -> Result<RunOutput, HarnessError> {
    let scenario = Scenario::build(config)?;
    run_scenario(&scenario, config)
}

/// Runs `config`'s scheduler over a prebuilt scenario. The scenario fixes
/// workload, fleet, revenue model and predictor; the config contributes the
/// scheduler, mode, thresholds and QoS/β settings.
pub fn run_scenario(scenario: &Scenario, config: &SimulationConfig) -> Result<RunOutput, HarnessError> {
    run_observed(scenario, config, |_| {})
}

pub fn run_observed(
    scenario: &Scenario,
    config: &SimulationConfig,
    mut observe: impl FnMut(&CycleView),
) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let curve = config.revenue;
    let a = &scenario.revenue;
    let mut fleet = scenario.fleet.clone();
    let e_count = fleet.len();
    let mut plan_beta = curve.beta;
    let mut qos_history: Vec<QosSample> = Vec::new();
    let mut low_streak = vec![0usize; e_count];
    let mut metrics = Vec::with_capacity(scenario.horizon());
    let horizon = scenario.horizon().min(config.horizon);

    for t in 0..horizon {
        let demand = &scenario.demands[t];
        let plan_params = curve.with_beta(plan_beta);
        let mut preschedule_ms = 0.0;
        let mut fallback = false;
        let mut plan = None;

        // Pre-scheduling happens ahead of the cycle unless running inline.
        let cycle_start;
        let assignment = if config.scheduler == SchedulerKind::Seer {
            let pre_start = Instant::now();
            let predicted = scenario.predict(t)?;
            let outcome = preschedule(&predicted, a, &fleet, &plan_params, config.mode, &config.prescheduler)
                .map_err(|e| HarnessError::Cycle(t, e.to_string()))?;
            preschedule_ms = ms(pre_start);
            fallback = outcome.fallback();
            cycle_start = if config.inline { pre_start } else { Instant::now() };
            let (mut assignment, leftovers) = match_requests(demand, &outcome.strategy);
            let mut states = remaining_bandwidth(&fleet, &assignment, a);
            reschedule(&leftovers, &mut states, &mut assignment, a, &scenario.distance);
            // discard on the utilization the cycle would actually end with
            if config.mode == Mode::Aggressive {
                assignment.discarded = apply_aggressive_filter(&mut states, &mut assignment, a, plan_params.alpha, plan_beta);
            }
            plan = Some(outcome.strategy);
            assignment
        } else {
            cycle_start = Instant::now();
            match config.scheduler {
                SchedulerKind::Origin => schedule_origin(demand, &fleet, a, &scenario.distance),
                SchedulerKind::Gp => schedule_gp(demand, &fleet, a, &scenario.distance),
                SchedulerKind::Greedy => schedule_greedy(demand, &fleet, a),
                SchedulerKind::Maxflow => schedule_maxflow(demand, &fleet, a, plan_beta, &config.maxflow),
                SchedulerKind::Seer => unreachable!(),
            }
        };
        let in_cycle_ms = ms(cycle_start);

        let mut rng = indexed_stream(config.seed, "qos", t as u64);
        let mut record = CycleMetrics {
            cycle: t,
            requests: demand.total() as u64,
            matched: assignment.matched_total(),
            rescheduled: assignment.rescheduled_total(),
            leftovers: assignment.leftovers as u64,
            dropped: assignment.dropped.len() as u64,
            discarded: assignment.discarded as u64,
            active: 0,
            revenue: 0.0,
            mean_utilization: 0.0,
            max_utilization: 0.0,
            withdrawals: 0,
            sla_violations: 0,
            beta: plan_beta,
            fallback,
            mean_latency: 0.0,
            mean_error_rate: 0.0,
            utilization: vec![0.0; e_count],
            preschedule_ms,
            in_cycle_ms,
        };
        for (e, server) in fleet.servers.iter().enumerate() {
            if !server.active {
                continue;
            }
            let u = assignment.load(e, a) / server.bandwidth;
            record.utilization[e] = u;
            record.active += 1;
            record.revenue += server_revenue(u, &curve);
            record.mean_utilization += u;
            record.max_utilization = record.max_utilization.max(u);
            record.withdrawals += u64::from(u < curve.alpha);
            record.sla_violations += u64::from(u > curve.beta);
            let q = qos_sample(u, &config.qos, &mut rng);
            record.mean_latency += q.latency;
            record.mean_error_rate += q.error_rate;
            qos_history.push(q);
        }
        if record.active > 0 {
            let k = record.active as f64;
            record.mean_utilization /= k;
            record.mean_latency /= k;
            record.mean_error_rate /= k;
        }

        let active = fleet.active_mask();
        observe(&CycleView {
            cycle: t,
            demand,
            plan: plan.as_ref(),
            assignment: &assignment,
            metrics: &record,
            active: &active,
        });

        if let Some(patience) = config.withdrawal_patience {
            for (e, server) in fleet.servers.iter_mut().enumerate() {
                if !server.active {
                    continue;
                }
                low_streak[e] = if record.utilization[e] < curve.alpha { low_streak[e] + 1 } else { 0 };
                if low_streak[e] >= patience {
                    log::info!("cycle {t}: server {e} withdrawn after {patience} cycles below alpha");
                    server.active = false;
                }
            }
        }
        // β changes only take effect from the next pre-schedule on
        let est = &config.beta_estimation;
        if config.beta_policy == BetaPolicy::Estimated && (t + 1) % est.interval == 0 && !qos_history.is_empty() {
            let raw = estimate_beta(&qos_history, curve.alpha)?;
            plan_beta = raw.clamp(est.min, est.max).max(curve.alpha.next_up());
            log::debug!("cycle {t}: beta re-estimated to {plan_beta} (raw {raw})");
        }
        metrics.push(record);
    }
    let summary = Summary::from_metrics(config, &metrics);
    Ok(RunOutput { metrics, summary })
}
