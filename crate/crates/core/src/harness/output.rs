//! Run artifacts. `metrics.csv` and `utilization.csv` depend only on config
//! and seed; wall-clock timings live in `timing.csv` and `summary.json`.

use super::sim::{CycleMetrics, Summary};
use super::HarnessError;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

pub const METRICS_COLUMNS: [&str; 17] = [
    "cycle",
    "requests",
    "matched",
    "rescheduled",
    "leftovers",
    "dropped",
    "discarded",
    "active",
    "revenue",
    "mean_utilization",
    "max_utilization",
    "withdrawals",
    "sla_violations",
    "beta",
    "fallback",
    "mean_latency",
    "mean_error_rate",
];

pub fn write_metrics<W: Write>(metrics: &[CycleMetrics], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_COLUMNS)?;
    for m in metrics {
        w.write_record([
            m.cycle.to_string(),
            m.requests.to_string(),
            m.matched.to_string(),
            m.rescheduled.to_string(),
            m.leftovers.to_string(),
            m.dropped.to_string(),
            m.discarded.to_string(),
            m.active.to_string(),
            m.revenue.to_string(),
            m.mean_utilization.to_string(),
            m.max_utilization.to_string(),
            m.withdrawals.to_string(),
            m.sla_violations.to_string(),
            m.beta.to_string(),
            u8::from(m.fallback).to_string(),
            m.mean_latency.to_string(),
            m.mean_error_rate.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per cycle, one column per server (`u_1` … `u_E`).
pub fn write_utilization<W: Write>(metrics: &[CycleMetrics], servers: usize, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["cycle".to_string()];
    header.extend((1..=servers).map(|e| format!("u_{e}")));
    w.write_record(&header)?;
    for m in metrics {
        let mut row = vec![m.cycle.to_string()];
        row.extend(m.utilization.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timing<W: Write>(metrics: &[CycleMetrics], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cycle", "preschedule_ms", "in_cycle_ms"])?;
    for m in metrics {
        w.write_record([m.cycle.to_string(), m.preschedule_ms.to_string(), m.in_cycle_ms.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, HarnessError> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::Io(path.display().to_string(), e))
}

/// Writes metrics.csv, utilization.csv, timing.csv and summary.json into `dir`.
pub fn write_run(dir: &Path, metrics: &[CycleMetrics], summary: &Summary, servers: usize) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::Io(dir.display().to_string(), e))?;
    write_metrics(metrics, create(dir, "metrics.csv")?)?;
    write_utilization(metrics, servers, create(dir, "utilization.csv")?)?;
    write_timing(metrics, create(dir, "timing.csv")?)?;
    let mut f = create(dir, "summary.json")?;
    serde_json::to_writer_pretty(&mut f, summary)?;
    writeln!(f).map_err(|e| HarnessError::Io("summary.json".into(), e))?;
    Ok(())
}
