//! Stage wiring: ingest, entropy filter, journeys, OD matrices and
//! statistics, plus matrix comparison.
//!
//! Each stage writes its artifacts in a fixed order (days ascending, users
//! ascending) so the output does not depend on the worker count.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime};
use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::filters::{entropy_filter, hourly_entropy, write_entropy_csv, EntropyFilter, UserEntropy};
use crate::geo::{zone_quantiles, ZoneQuantiles};
use crate::ingest::{group_user_days, parse_cdr_path, AntennaRegistry, IngestOptions, IngestReport, UserDayTrace};
use crate::journey::{extract_trips, read_journeys_jsonl, reconstruct, write_journeys_jsonl, DailyJourney, TripRecord};
use crate::odflow::{average_matrices, build_od, spearman, trip_stats, ODMatrix, SpearmanResult, TripStats};
use crate::synthcity::{score_recovery, RecoveryReport};

/// Runs `f` on a pool of `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

pub struct Ingested {
    pub registry: AntennaRegistry,
    pub traces: Vec<UserDayTrace>,
    pub report: IngestReport,
}

/// Loads the registry, parses every CDR file (concurrently) and groups the
/// events into user-day traces, keeping only `cfg.days` when set.
pub fn ingest(cfg: &PipelineConfig, cdr: &[PathBuf], antennas: &Path) -> Result<Ingested> {
    let registry = AntennaRegistry::from_path(antennas)?;
    let opts = IngestOptions { reject_threshold: cfg.reject_threshold };
    let parsed: Vec<_> = cdr
        .par_iter()
        .map(|p| {
            parse_cdr_path(p, &registry, &opts).map_err(|e| match e {
                Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", p.display()))),
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    let mut report = IngestReport::default();
    let mut events = Vec::with_capacity(parsed.iter().map(|(e, _)| e.len()).sum());
    for (e, r) in parsed {
        report.merge(&r);
        events.extend(e);
    }
    let mut traces = group_user_days(events);
    if let Some(days) = &cfg.days {
        traces.retain(|t| days.contains(&t.day));
    }
    Ok(Ingested { registry, traces, report })
}

#[derive(Clone, Debug, Serialize)]
pub struct DayFilterReport {
    pub day: NaiveDate,
    pub low_cut: f64,
    pub high_cut: f64,
    pub considered: usize,
    pub retained: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyReport {
    pub filter: EntropyFilter,
    pub days: Vec<DayFilterReport>,
}

pub struct Journeys {
    pub entropies: Vec<UserEntropy>,
    pub entropy_report: EntropyReport,
    /// Journeys of retained users that hold at least one trip or non-trip.
    pub journeys: Vec<DailyJourney>,
    pub excluded: usize,
}

/// Entropy filter (cuts computed per day) followed by per-trace journey
/// reconstruction.
pub fn estimate_journeys(
    cfg: &PipelineConfig,
    registry: &AntennaRegistry,
    zq: &ZoneQuantiles,
    traces: &[UserDayTrace],
) -> Result<Journeys> {
    let entropies: Vec<UserEntropy> = traces.par_iter().map(hourly_entropy).collect::<Result<_>>()?;
    let filter = cfg.entropy_filter();

    let mut by_day: BTreeMap<NaiveDate, Vec<usize>> = BTreeMap::new();
    for (i, t) in traces.iter().enumerate() {
        by_day.entry(t.day).or_default().push(i);
    }
    let mut retained = vec![false; traces.len()];
    let mut days = Vec::with_capacity(by_day.len());
    for (day, idx) in by_day {
        let sample: Vec<UserEntropy> = idx.iter().map(|&i| entropies[i].clone()).collect();
        let outcome = entropy_filter(&sample, filter)?;
        for (k, &i) in idx.iter().enumerate() {
            retained[i] = outcome.retained[k];
        }
        days.push(DayFilterReport {
            day,
            low_cut: outcome.low_cut,
            high_cut: outcome.high_cut,
            considered: outcome.considered,
            retained: outcome.retained_count,
        });
    }

    let reconstructed: Vec<DailyJourney> = traces
        .par_iter()
        .zip(retained.par_iter())
        .filter(|(_, &keep)| keep)
        .map(|(t, _)| reconstruct(t, registry, zq, &cfg.journey))
        .collect::<Result<_>>()?;
    let before = reconstructed.len();
    let journeys: Vec<DailyJourney> = reconstructed.into_iter().filter(|j| !j.is_excluded()).collect();
    Ok(Journeys {
        entropies,
        entropy_report: EntropyReport { filter, days },
        excluded: before - journeys.len(),
        journeys,
    })
}

pub fn trips_by_day(journeys: &[DailyJourney], registry: &AntennaRegistry) -> BTreeMap<NaiveDate, Vec<TripRecord>> {
    let mut out: BTreeMap<NaiveDate, Vec<TripRecord>> = BTreeMap::new();
    for j in journeys {
        out.entry(j.day).or_default().extend(extract_trips(j, registry).0);
    }
    out
}

/// Per-day transient matrices for `days` and their element-wise mean.
pub fn od_matrices(
    journeys: &[DailyJourney],
    registry: &AntennaRegistry,
    days: &[NaiveDate],
) -> Result<(Vec<ODMatrix>, ODMatrix)> {
    let labels = registry.municipality_labels();
    let by_day = trips_by_day(journeys, registry);
    let daily: Vec<ODMatrix> = days
        .par_iter()
        .map(|d| {
            let mut m = build_od(by_day.get(d).map(Vec::as_slice).unwrap_or_default(), labels)?;
            m.day = Some(*d);
            Ok(m)
        })
        .collect::<Result<_>>()?;
    let mean = if daily.is_empty() { ODMatrix::zeros(labels.to_vec())? } else { average_matrices(&daily)? };
    Ok((daily, mean))
}

/// Writes `od_{day}.csv` for each day and `od_mean.csv`.
pub fn write_od_outputs(dir: &Path, daily: &[ODMatrix], mean: &ODMatrix) -> Result<()> {
    fs::create_dir_all(dir)?;
    for m in daily {
        let day = m.day.map(|d| d.to_string()).unwrap_or_default();
        m.write_path(&dir.join(format!("od_{day}.csv")))?;
    }
    mean.write_path(&dir.join("od_mean.csv"))
}

#[derive(Clone, Debug, Serialize)]
pub struct DaySummary {
    pub day: NaiveDate,
    pub users: usize,
    pub trips: usize,
    pub mean_duration_min: Option<f64>,
    pub mean_distance_km: Option<f64>,
}

/// Trip statistics per day; `events` supplies the per-minute event series.
pub fn day_stats(
    journeys: &[DailyJourney],
    registry: &AntennaRegistry,
    days: &[NaiveDate],
    events: &BTreeMap<NaiveDate, Vec<NaiveDateTime>>,
) -> Vec<(DaySummary, TripStats)> {
    let by_day = trips_by_day(journeys, registry);
    days.par_iter()
        .map(|d| {
            let trips = by_day.get(d).map(Vec::as_slice).unwrap_or_default();
            let stats = trip_stats(trips, events.get(d).into_iter().flatten().copied());
            let summary = DaySummary {
                day: *d,
                users: journeys.iter().filter(|j| j.day == *d).count(),
                trips: trips.len(),
                mean_duration_min: stats.mean_duration_min,
                mean_distance_km: stats.mean_distance_km,
            };
            (summary, stats)
        })
        .collect()
}

pub fn event_times_by_day(traces: &[UserDayTrace]) -> BTreeMap<NaiveDate, Vec<NaiveDateTime>> {
    let mut out: BTreeMap<NaiveDate, Vec<NaiveDateTime>> = BTreeMap::new();
    for t in traces {
        out.entry(t.day).or_default().extend(t.events.iter().map(|e| e.timestamp));
    }
    out
}

/// Writes the per-day stats CSVs and `stats_summary.csv` into `dir`.
pub fn write_stats_outputs(dir: &Path, stats: &[(DaySummary, TripStats)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("stats_summary.csv"))?;
    w.write_record(["day", "users", "trips", "mean_duration_min", "mean_distance_km"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (s, t) in stats {
        w.write_record([
            s.day.to_string(),
            s.users.to_string(),
            s.trips.to_string(),
            opt(s.mean_duration_min),
            opt(s.mean_distance_km),
        ])?;
        t.write_dir(dir, &s.day.to_string())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub ingest: IngestReport,
    pub traces: usize,
    pub journeys: usize,
    pub excluded: usize,
    pub days: Vec<DaySummary>,
}

/// Writes the ingest, zone, entropy and journey artifacts.
pub fn write_journey_outputs(
    out: &Path,
    cfg: &PipelineConfig,
    ing: &Ingested,
    zq: &ZoneQuantiles,
    js: &Journeys,
) -> Result<()> {
    fs::create_dir_all(out)?;
    write_json(&out.join("ingest_report.json"), &ing.report)?;
    zq.write_csv(BufWriter::new(File::create(out.join("zone_quantiles.csv"))?))?;
    write_entropy_csv(BufWriter::new(File::create(out.join("entropy.csv"))?), &js.entropies)?;
    write_json(&out.join("entropy_report.json"), &js.entropy_report)?;
    write_journeys_jsonl(
        BufWriter::new(File::create(out.join("journeys.jsonl"))?),
        &js.journeys,
        &ing.registry,
        cfg.timezone,
    )
}

/// Ingest through journeys, writing the journey-stage artifacts.
pub fn run_journeys(cfg: &PipelineConfig, cdr: &[PathBuf], antennas: &Path, out: &Path) -> Result<(Ingested, Journeys)> {
    cfg.validate()?;
    with_workers(cfg.workers, || {
        let ing = ingest(cfg, cdr, antennas)?;
        if ing.traces.is_empty() {
            warn!("no events to process");
        }
        let zq = zone_quantiles(&ing.registry, cfg.quantile, cfg.dmin_floor_m)?;
        let js = estimate_journeys(cfg, &ing.registry, &zq, &ing.traces)?;
        write_journey_outputs(out, cfg, &ing, &zq, &js)?;
        Ok((ing, js))
    })?
}

/// The whole chain. Artifacts under `out`:
/// `ingest_report.json`, `zone_quantiles.csv`, `entropy.csv`,
/// `entropy_report.json`, `journeys.jsonl`, `od/od_{day}.csv`,
/// `od/od_mean.csv`, `stats/stats_summary.csv` and
/// `stats/{day}_{variable}_{hist|cdf}.csv`.
pub fn run_pipeline(cfg: &PipelineConfig, cdr: &[PathBuf], antennas: &Path, out: &Path) -> Result<RunSummary> {
    let (ing, js) = run_journeys(cfg, cdr, antennas, out)?;
    with_workers(cfg.workers, || {
        let events = event_times_by_day(&ing.traces);
        let days: Vec<NaiveDate> = events.keys().copied().collect();
        let (daily, mean) = od_matrices(&js.journeys, &ing.registry, &days)?;
        write_od_outputs(&out.join("od"), &daily, &mean)?;
        let stats = day_stats(&js.journeys, &ing.registry, &days, &events);
        write_stats_outputs(&out.join("stats"), &stats)?;
        Ok(RunSummary {
            ingest: ing.report.clone(),
            traces: ing.traces.len(),
            journeys: js.journeys.len(),
            excluded: js.excluded,
            days: stats.into_iter().map(|(s, _)| s).collect(),
        })
    })?
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Comparison {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub with_diagonal: Option<SpearmanResult>,
    pub without_diagonal: Option<SpearmanResult>,
}

/// Compares two matrix files. Without `no_diagonal` both variants are
/// computed.
pub fn run_compare(a: &Path, b: &Path, no_diagonal: bool) -> Result<Comparison> {
    let (ma, mb) = (ODMatrix::read_path(a)?, ODMatrix::read_path(b)?);
    compare_matrices(&ma, &mb, no_diagonal)
}

pub fn compare_matrices(a: &ODMatrix, b: &ODMatrix, no_diagonal: bool) -> Result<Comparison> {
    if a.labels() != b.labels() {
        return Err(Error::LabelMismatch);
    }
    Ok(Comparison {
        with_diagonal: if no_diagonal { None } else { Some(spearman(a, b, true)?) },
        without_diagonal: Some(spearman(a, b, false)?),
    })
}

pub fn load_journeys(path: &Path, registry: &AntennaRegistry) -> Result<Vec<DailyJourney>> {
    read_journeys_jsonl(BufReader::new(File::open(path)?), registry)
}

/// Days to report on: the configured list, otherwise every day present.
fn report_days(cfg: &PipelineConfig, present: impl IntoIterator<Item = NaiveDate>) -> Vec<NaiveDate> {
    match &cfg.days {
        Some(days) => {
            let mut d = days.clone();
            d.sort();
            d.dedup();
            d
        }
        None => present.into_iter().collect::<BTreeSet<_>>().into_iter().collect(),
    }
}

/// OD stage on its own: reads `journeys.jsonl` and writes `od_*.csv` to `out`.
pub fn run_od(cfg: &PipelineConfig, journeys: &Path, antennas: &Path, out: &Path) -> Result<ODMatrix> {
    cfg.validate()?;
    let registry = AntennaRegistry::from_path(antennas)?;
    let js = load_journeys(journeys, &registry)?;
    let days = report_days(cfg, js.iter().map(|j| j.day));
    with_workers(cfg.workers, || {
        let (daily, mean) = od_matrices(&js, &registry, &days)?;
        write_od_outputs(out, &daily, &mean)?;
        Ok(mean)
    })?
}

/// Stats stage on its own. The event-frequency series is filled only when
/// CDR files are given.
pub fn run_stats(
    cfg: &PipelineConfig,
    journeys: &Path,
    antennas: &Path,
    cdr: &[PathBuf],
    out: &Path,
) -> Result<Vec<DaySummary>> {
    cfg.validate()?;
    let registry = AntennaRegistry::from_path(antennas)?;
    let js = load_journeys(journeys, &registry)?;
    with_workers(cfg.workers, || {
        let events = if cdr.is_empty() {
            BTreeMap::new()
        } else {
            event_times_by_day(&ingest(cfg, cdr, antennas)?.traces)
        };
        let days = report_days(cfg, js.iter().map(|j| j.day).chain(events.keys().copied()));
        let stats = day_stats(&js, &registry, &days, &events);
        write_stats_outputs(out, &stats)?;
        Ok(stats.into_iter().map(|(s, _)| s).collect())
    })?
}

/// Scores recovered journeys against ground truth, both as JSON-lines.
pub fn run_score(truth: &Path, journeys: &Path, antennas: &Path) -> Result<RecoveryReport> {
    let registry = AntennaRegistry::from_path(antennas)?;
    score_recovery(&load_journeys(truth, &registry)?, &load_journeys(journeys, &registry)?, &registry)
}
