use super::config::{BetaPolicy, SimulationConfig};
use super::scenario::Scenario;
use super::sim::{run_scenario, RunOutput};
use super::HarnessError;
use crate::baselines::SchedulerKind;
use crate::prescheduler::Mode;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub beta: f64,
    pub mode: Mode,
    pub mean_revenue: f64,
    pub mean_utilization: f64,
    pub withdrawal_rate: f64,
    pub sla_rate: f64,
}

/// Parses `start:step:end` (inclusive) or a comma-separated list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, HarnessError> {
    let bad = || HarnessError::Config(format!("bad grid `{spec}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
        let (start, step, end) = (v[0], v[1], v[2]);
        if !(step > 0.0) || end < start {
            return Err(bad());
        }
        let n = ((end - start) / step + 1e-9).floor() as usize;
        // round to a decimal grid so 0.1 * 3 prints as 0.3
        return Ok((0..=n).map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9).collect());
    }
    spec.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect()
}

/// Runs `configs` over a shared scenario on up to `threads` workers. Results
/// keep the input order.
pub fn run_parallel(
    scenario: &Scenario,
    configs: &[SimulationConfig],
    threads: usize,
) -> Vec<Result<RunOutput, HarnessError>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<RunOutput, HarnessError>>>> = configs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, configs.len().max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= configs.len() {
                    break;
                }
                let result = run_scenario(scenario, &configs[k]);
                *slots[k].lock().expect("slot lock") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every job ran"))
        .collect()
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Seer in both modes at every (α, β) grid point, with β fixed per point.
pub fn sweep_thresholds(
    scenario: &Scenario,
    base: &SimulationConfig,
    alphas: &[f64],
    betas: &[f64],
    threads: usize,
) -> Result<Vec<SweepRow>, HarnessError> {
    if alphas.is_empty() || betas.is_empty() {
        return Err(HarnessError::Config("empty sweep grid".into()));
    }
    let mut configs = Vec::new();
    for &alpha in alphas {
        for &beta in betas {
            if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) || alpha >= beta {
                return Err(HarnessError::Config(format!("grid point alpha {alpha} beta {beta} invalid")));
            }
            for mode in [Mode::Conservative, Mode::Aggressive] {
                let mut c = base.clone();
                c.scheduler = SchedulerKind::Seer;
                c.mode = mode;
                c.revenue.alpha = alpha;
                c.revenue.beta = beta;
                c.beta_policy = BetaPolicy::Fixed;
                configs.push(c);
            }
        }
    }
    run_parallel(scenario, &configs, threads)
        .into_iter()
        .zip(&configs)
        .map(|(r, c)| {
            let s = r?.summary;
            Ok(SweepRow {
                alpha: c.revenue.alpha,
                beta: c.revenue.beta,
                mode: c.mode,
                mean_revenue: s.mean_revenue,
                mean_utilization: s.mean_utilization,
                withdrawal_rate: s.withdrawal_rate,
                sla_rate: s.sla_rate,
            })
        })
        .collect()
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "beta", "mode", "mean_revenue", "mean_utilization", "withdrawal_rate", "sla_rate"])?;
    for r in rows {
        w.write_record([
            r.alpha.to_string(),
            r.beta.to_string(),
            r.mode.to_string(),
            r.mean_revenue.to_string(),
            r.mean_utilization.to_string(),
            r.withdrawal_rate.to_string(),
            r.sla_rate.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
