use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cdr_journeys::config::{EntropyMode, PipelineConfig};
use cdr_journeys::geo::zone_quantiles;
use cdr_journeys::pipeline::{self, with_workers, Comparison};
use cdr_journeys::synthcity::{generate, SynthConfig};

/// Daily journeys and origin-destination matrices from call detail records.
#[derive(Parser)]
#[command(name = "cdr-journeys", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse CDR files and report accepted and rejected rows.
    IngestCheck {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        opts: Opts,
    },
    /// Entropy filter and journey reconstruction.
    Journeys {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        opts: Opts,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-day and mean OD matrices from a journeys file.
    Od {
        #[arg(long)]
        journeys: PathBuf,
        #[arg(long)]
        antennas: PathBuf,
        #[command(flatten)]
        opts: Opts,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spearman correlation between two OD matrix files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Only report the correlation without the diagonal.
        #[arg(long)]
        no_diagonal: bool,
        #[arg(long)]
        json: bool,
    },
    /// Trip histograms, CDFs and means from a journeys file.
    Stats {
        #[arg(long)]
        journeys: PathBuf,
        #[arg(long)]
        antennas: PathBuf,
        /// CDR files for the per-minute event series.
        #[arg(long, num_args = 1..)]
        cdr: Vec<PathBuf>,
        #[command(flatten)]
        opts: Opts,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic city, its CDR stream and ground truth.
    Synth(SynthArgs),
    /// Score recovered journeys against ground truth.
    Score {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        journeys: PathBuf,
        #[arg(long)]
        antennas: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Ingest, journeys, OD matrices and statistics in one pass.
    Run {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        opts: Opts,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Input {
    #[arg(long, num_args = 1.., required = true)]
    cdr: Vec<PathBuf>,
    #[arg(long)]
    antennas: PathBuf,
}

/// Pipeline options. Flags override the config file, which overrides defaults.
#[derive(Args)]
struct Opts {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated YYYY-MM-DD list.
    #[arg(long, value_delimiter = ',')]
    days: Vec<NaiveDate>,
    #[arg(long)]
    epsilon_m: Option<f64>,
    #[arg(long)]
    time_scale: Option<f64>,
    #[arg(long)]
    quantile: Option<f64>,
    /// fixed, quantile or off.
    #[arg(long)]
    entropy_mode: Option<EntropyMode>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    json: bool,
}

impl Opts {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path).with_context(|| format!("config {}", path.display()))?;
        }
        if !self.days.is_empty() {
            cfg.days = Some(self.days.clone());
        }
        if let Some(v) = self.epsilon_m {
            cfg.journey.epsilon_m = v;
        }
        if let Some(v) = self.time_scale {
            cfg.journey.time_scale = v;
        }
        if let Some(v) = self.quantile {
            cfg.quantile = v;
        }
        if let Some(m) = self.entropy_mode {
            cfg.entropy_mode = m;
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    users: Option<usize>,
    /// Number of consecutive days to simulate.
    #[arg(long)]
    num_days: Option<u32>,
    #[arg(long)]
    first_day: Option<NaiveDate>,
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    cadence_min: Option<f64>,
    #[arg(long)]
    vehicle_fraction: Option<f64>,
    #[arg(long)]
    wanderer_fraction: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
}

impl SynthArgs {
    fn config(&self) -> SynthConfig {
        let d = SynthConfig::default();
        SynthConfig {
            seed: self.seed.unwrap_or(d.seed),
            users: self.users.unwrap_or(d.users),
            days: self.num_days.unwrap_or(d.days),
            first_day: self.first_day.unwrap_or(d.first_day),
            jitter: self.jitter.unwrap_or(d.jitter),
            cadence_min: self.cadence_min.unwrap_or(d.cadence_min),
            vehicle_fraction: self.vehicle_fraction.unwrap_or(d.vehicle_fraction),
            wanderer_fraction: self.wanderer_fraction.unwrap_or(d.wanderer_fraction),
            ..d
        }
    }
}

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce(&T) -> String) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(value)?);
    } else {
        print!("{}", text(value));
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn comparison_text(c: &Comparison) -> String {
    let mut s = String::new();
    for (name, r) in [("with diagonal", &c.with_diagonal), ("without diagonal", &c.without_diagonal)] {
        if let Some(r) = r {
            s += &format!("{name}: rho={:.6} p={:.3e} n={}\n", r.rho, r.p_value, r.n);
        }
    }
    s
}

fn ingest_check(input: &Input, opts: &Opts) -> Result<()> {
    let cfg = opts.resolve()?;
    let ing = with_workers(cfg.workers, || pipeline::ingest(&cfg, &input.cdr, &input.antennas))?
        .context("ingest stage")?;
    emit(opts.json, &ing.report, |r| {
        format!(
            "rows={} accepted={} bad_timestamp={} unknown_antenna={} malformed={} traces={}\n",
            r.rows,
            r.accepted,
            r.bad_timestamp,
            r.unknown_antenna,
            r.malformed,
            ing.traces.len()
        )
    })
}

fn journeys(input: &Input, opts: &Opts, out: &Path) -> Result<()> {
    let cfg = opts.resolve()?;
    let (ing, js) = pipeline::run_journeys(&cfg, &input.cdr, &input.antennas, out).context("journeys stage")?;
    let summary = serde_json::json!({
        "ingest": ing.report,
        "traces": ing.traces.len(),
        "journeys": js.journeys.len(),
        "excluded": js.excluded,
        "mean_zone_q_m": zone_quantiles(&ing.registry, cfg.quantile, cfg.dmin_floor_m)?.mean_q(),
    });
    emit(opts.json, &summary, |s| format!("traces={} journeys={} excluded={}\n", s["traces"], s["journeys"], s["excluded"]))
}

fn run(input: &Input, opts: &Opts, out: &Path) -> Result<()> {
    let cfg = opts.resolve()?;
    let summary = pipeline::run_pipeline(&cfg, &input.cdr, &input.antennas, out).context("pipeline")?;
    emit(opts.json, &summary, |s| {
        let mut t = format!("traces={} journeys={} excluded={}\n", s.traces, s.journeys, s.excluded);
        for d in &s.days {
            t += &format!(
                "{} users={} trips={} mean_duration_min={} mean_distance_km={}\n",
                d.day,
                d.users,
                d.trips,
                fmt_opt(d.mean_duration_min),
                fmt_opt(d.mean_distance_km)
            );
        }
        t
    })
}

fn synth(args: &SynthArgs) -> Result<()> {
    let cfg = args.config();
    let output = with_workers(args.workers, || generate(&cfg))?.context("synthetic generation")?;
    output.write_dir(&args.out)?;
    println!(
        "antennas={} events={} journeys={} -> {}",
        output.registry.len(),
        output.events.len(),
        output.truth.journeys.len(),
        args.out.display()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::IngestCheck { input, opts } => ingest_check(input, opts),
        Command::Journeys { input, opts, out } => journeys(input, opts, out),
        Command::Od { journeys, antennas, opts, out } => {
            let cfg = opts.resolve()?;
            let mean = pipeline::run_od(&cfg, journeys, antennas, out).context("od stage")?;
            emit(opts.json, &serde_json::json!({ "labels": mean.labels(), "total_trips_per_day": mean.total() }), |v| {
                format!("municipalities={} mean trips per day={}\n", mean.size(), v["total_trips_per_day"])
            })
        }
        Command::Compare { a, b, no_diagonal, json } => {
            let c = pipeline::run_compare(a, b, *no_diagonal)
                .with_context(|| format!("compare {} {}", a.display(), b.display()))?;
            emit(*json, &c, comparison_text)
        }
        Command::Stats { journeys, antennas, cdr, opts, out } => {
            let cfg = opts.resolve()?;
            let days = pipeline::run_stats(&cfg, journeys, antennas, cdr, out).context("stats stage")?;
            emit(opts.json, &days, |ds| {
                ds.iter()
                    .map(|d| format!("{} trips={} mean_duration_min={}\n", d.day, d.trips, fmt_opt(d.mean_duration_min)))
                    .collect()
            })
        }
        Command::Synth(args) => synth(args),
        Command::Score { truth, journeys, antennas, json } => {
            let r = pipeline::run_score(truth, journeys, antennas).context("score")?;
            emit(*json, &r, |r| {
                format!(
                    "true={} recovered={} matched={} recall={} precision={} od_rho={} duration_mae_min={} distance_mae_m={}\n",
                    r.true_trips,
                    r.recovered_trips,
                    r.matched,
                    fmt_opt(r.recall),
                    fmt_opt(r.precision),
                    fmt_opt(r.od_rho),
                    fmt_opt(r.duration_mae_min),
                    fmt_opt(r.distance_mae_m)
                )
            })
        }
        Command::Run { input, opts, out } => run(input, opts, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
