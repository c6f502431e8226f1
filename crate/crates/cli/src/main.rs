use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use seer_core::analysis::{acf, empirical_cdf, pearson_corr};
use seer_core::baselines::SchedulerKind;
use seer_core::harness::{
    default_threads, parse_grid, run_parallel, run_scenario, sweep_thresholds, write_run, write_sweep, PredictorChoice,
    Scenario, SimulationConfig,
};
use seer_core::prescheduler::Mode;
use seer_core::workload::{load_trace, save_trace, synthesize_trace};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "seer", version, about = "Revenue-aware proactive scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON simulation config; built-in desk defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluated cycles after warm-up.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    predictor: Option<PredictorChoice>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<SimulationConfig> {
        let mut config = match &self.config {
            Some(path) => SimulationConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => SimulationConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(h) = self.horizon {
            config.horizon = h;
        }
        if let Some(p) = self.predictor {
            config.predictor = p;
        }
        if let Some(out) = &self.out {
            config.output_dir = Some(out.clone());
        }
        config.validate()?;
        Ok(config)
    }
}

fn out_dir(config: &SimulationConfig) -> PathBuf {
    config.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scheduler and write metrics.csv, utilization.csv, timing.csv, summary.json.
    Run {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        scheduler: Option<SchedulerKind>,
        #[arg(long)]
        mode: Option<Mode>,
        /// Solve the pre-schedule inside the cycle (timing diagnostic).
        #[arg(long)]
        inline: bool,
    },
    /// Run Seer in both modes and every baseline on one scenario.
    Compare {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Mean revenue of both Seer modes over an (alpha, beta) grid.
    Sweep {
        #[command(flatten)]
        common: ConfigArgs,
        /// `start:step:end` or a comma list.
        #[arg(long, default_value = "0:0.1:0.3")]
        alpha: String,
        #[arg(long, default_value = "0.6:0.05:0.9")]
        beta: String,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Train the clustering, revenue and request models and save them.
    Train {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        latent: Option<usize>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Write the configured synthetic workload (warm-up + horizon) as a trace CSV.
    Synth {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long, default_value = "trace.csv")]
        trace: PathBuf,
    },
    /// Autocorrelation, cross-location correlation and volume CDF of a trace.
    Analyze {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 6)]
        locations: usize,
        #[arg(long, default_value_t = 2000)]
        max_lag: usize,
        #[arg(long, default_value = "analysis")]
        out: PathBuf,
    },
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn run(mut config: SimulationConfig, scheduler: Option<SchedulerKind>, mode: Option<Mode>, inline: bool) -> Result<()> {
    if let Some(s) = scheduler {
        config.scheduler = s;
    }
    if let Some(m) = mode {
        config.mode = m;
    }
    config.inline |= inline;
    let scenario = Scenario::build(&config)?;
    let output = run_scenario(&scenario, &config)?;
    let dir = out_dir(&config);
    write_run(&dir, &output.metrics, &output.summary, scenario.fleet.len())?;
    print_json(&output.summary)
}

fn compare(config: SimulationConfig, threads: usize) -> Result<()> {
    let scenario = Scenario::build(&config)?;
    let mut variants = vec![("seer_c".to_string(), SchedulerKind::Seer, Mode::Conservative)];
    variants.push(("seer_a".to_string(), SchedulerKind::Seer, Mode::Aggressive));
    for kind in [SchedulerKind::Maxflow, SchedulerKind::Origin, SchedulerKind::Gp, SchedulerKind::Greedy] {
        variants.push((kind.as_str().to_string(), kind, Mode::Conservative));
    }
    let configs: Vec<SimulationConfig> = variants
        .iter()
        .map(|(_, k, m)| SimulationConfig {
            scheduler: *k,
            mode: *m,
            ..config.clone()
        })
        .collect();
    let dir = out_dir(&config);
    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record(["method", "mean_revenue", "mean_utilization", "withdrawal_rate", "sla_rate", "dropped"])?;
    for ((name, _, _), result) in variants.iter().zip(run_parallel(&scenario, &configs, threads)) {
        let output = result?;
        write_run(&dir.join(name), &output.metrics, &output.summary, scenario.fleet.len())?;
        let s = &output.summary;
        table.write_record([
            name.clone(),
            s.mean_revenue.to_string(),
            s.mean_utilization.to_string(),
            s.withdrawal_rate.to_string(),
            s.sla_rate.to_string(),
            s.dropped.to_string(),
        ])?;
    }
    let bytes = table.into_inner()?;
    fs::write(dir.join("comparison.csv"), &bytes)?;
    print!("{}", String::from_utf8(bytes)?);
    Ok(())
}

fn sweep(config: SimulationConfig, alpha: &str, beta: &str, threads: usize) -> Result<()> {
    let alphas = parse_grid(alpha)?;
    let betas = parse_grid(beta)?;
    let scenario = Scenario::build(&config)?;
    let rows = sweep_thresholds(&scenario, &config, &alphas, &betas, threads)?;
    let dir = out_dir(&config);
    fs::create_dir_all(&dir)?;
    write_sweep(&rows, create(&dir.join("sweep.csv"))?)?;
    write_sweep(&rows, std::io::stdout().lock())?;
    Ok(())
}

fn train(mut config: SimulationConfig, latent: Option<usize>, window: Option<usize>, epochs: Option<usize>) -> Result<()> {
    let pc = &mut config.predictor_config;
    pc.latent = latent.unwrap_or(pc.latent);
    pc.window = window.unwrap_or(pc.window);
    pc.epochs = epochs.unwrap_or(pc.epochs);
    config.predictor = PredictorChoice::AeGru;
    config.validate()?;
    let scenario = Scenario::build(&config)?;
    let dir = out_dir(&config);
    fs::create_dir_all(&dir)?;
    let params = scenario.predictor.as_ref().expect("AE-GRU scenario has a predictor");
    params.save(&dir.join("predictor.json"))?;
    scenario.revenue_model.save(&dir.join("revenue_model.json"))?;
    fs::write(dir.join("clusters.json"), serde_json::to_string_pretty(&scenario.clusters)?)?;
    scenario.revenue.write_csv(create(&dir.join("revenue_matrix.csv"))?)?;
    let report = scenario.training.as_ref().expect("training report");
    let mut w = create(&dir.join("training.csv"))?;
    writeln!(w, "epoch,loss")?;
    for (epoch, loss) in report.losses.iter().enumerate() {
        writeln!(w, "{epoch},{loss}")?;
    }
    w.flush()?;
    println!(
        "trained on {} windows: loss {} -> {} (best)",
        report.samples,
        report.initial(),
        report.best()
    );
    Ok(())
}

fn synth(config: SimulationConfig, trace: &Path) -> Result<()> {
    if config.trace.is_some() {
        bail!("config already reads a trace file");
    }
    let mut workload = config.workload.clone();
    workload.horizon = config.trace_len();
    let t = synthesize_trace(&workload, seer_core::rng::substream_seed(config.seed, "workload"))?;
    save_trace(&t, trace)?;
    println!("{} requests over {} cycles -> {}", t.requests.len(), t.horizon, trace.display());
    Ok(())
}

fn analyze(trace: &Path, locations: usize, max_lag: usize, out: &Path) -> Result<()> {
    let t = load_trace(trace, locations)?;
    fs::create_dir_all(out)?;
    let total = t.counts_per_cycle(None);
    let lag = max_lag.min(total.len().saturating_sub(1));
    let rho = acf(&total, lag)?;
    let mut w = create(&out.join("acf.csv"))?;
    writeln!(w, "lag,acf")?;
    for (h, r) in rho.iter().enumerate() {
        writeln!(w, "{h},{r}")?;
    }
    w.flush()?;

    let per_location: Vec<Vec<f64>> = (0..locations).map(|m| t.counts_per_cycle(Some(m))).collect();
    let mut w = create(&out.join("correlation.csv"))?;
    writeln!(w, "a,b,pearson")?;
    for a in 0..locations {
        for b in 0..locations {
            let r = pearson_corr(&per_location[a], &per_location[b]).map_or(f64::NAN, |r| r);
            writeln!(w, "{},{},{r}", a + 1, b + 1)?;
        }
    }
    w.flush()?;

    let cdf = empirical_cdf(&total)?;
    let mut w = create(&out.join("volume_cdf.csv"))?;
    writeln!(w, "percentile,requests")?;
    for p in (0..=100).step_by(5) {
        writeln!(w, "{p},{}", cdf.query(f64::from(p)))?;
    }
    w.flush()?;
    let day = 1440.min(lag);
    println!(
        "{} requests, {} cycles; acf(1) = {:.4}, acf({day}) = {:.4}; median volume {}",
        t.requests.len(),
        t.horizon,
        rho.get(1).copied().unwrap_or(f64::NAN),
        rho[day],
        cdf.query(50.0)
    );
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            common,
            scheduler,
            mode,
            inline,
        } => run(common.load()?, scheduler, mode, inline),
        Command::Compare { common, threads } => compare(common.load()?, threads.unwrap_or_else(default_threads)),
        Command::Sweep {
            common,
            alpha,
            beta,
            threads,
        } => sweep(common.load()?, &alpha, &beta, threads.unwrap_or_else(default_threads)),
        Command::Train {
            common,
            latent,
            window,
            epochs,
        } => train(common.load()?, latent, window, epochs),
        Command::Synth { common, trace } => synth(common.load()?, &trace),
        Command::Analyze {
            trace,
            locations,
            max_lag,
            out,
        } => analyze(&trace, locations, max_lag, &out),
    }
}
