//! Origin-destination matrices, their comparison, and trip-variable
//! distributions.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::journey::TripRecord;
use crate::quantile::quantile_sorted;

/// Square trip-count matrix; rows are origins, columns destinations.
#[derive(Clone, Debug, PartialEq)]
pub struct ODMatrix {
    labels: Vec<String>,
    counts: Vec<f64>,
    pub day: Option<NaiveDate>,
}

impl ODMatrix {
    pub fn zeros(labels: Vec<String>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::Matrix(format!("duplicate label `{dup}`")));
        }
        let n = labels.len();
        Ok(ODMatrix { labels, counts: vec![0.0; n * n], day: None })
    }

    pub fn from_rows(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut m = Self::zeros(labels)?;
        let n = m.size();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Matrix(format!("expected {n}x{n} values")));
        }
        if rows.iter().flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Matrix("counts must be finite and non-negative".into()));
        }
        m.counts = rows.into_iter().flatten().collect();
        Ok(m)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, o: usize, d: usize) -> f64 {
        self.counts[o * self.size() + d]
    }

    pub fn row(&self, o: usize) -> &[f64] {
        let n = self.size();
        &self.counts[o * n..(o + 1) * n]
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Header row of labels, then one row of counts per origin.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.labels)?;
        for o in 0..self.size() {
            w.write_record(self.row(o).iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Also accepts a leading origin-label column (header starting with an
    /// empty cell or `origin`).
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
        let mut records = rdr.records();
        let header = records.next().ok_or_else(|| Error::Matrix("empty matrix file".into()))??;
        let labeled = matches!(header.get(0), Some("") | Some("origin"));
        let labels: Vec<String> = header.iter().skip(usize::from(labeled)).map(str::to_string).collect();
        let mut rows = Vec::with_capacity(labels.len());
        for (i, rec) in records.enumerate() {
            let rec = rec?;
            let mut cells = rec.iter();
            if labeled {
                let origin = cells.next().unwrap_or_default();
                if labels.get(i).map(String::as_str) != Some(origin) {
                    return Err(Error::Matrix(format!("row {} labeled `{origin}` out of order", i + 1)));
                }
            }
            rows.push(
                cells
                    .map(|c| {
                        c.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Matrix(format!("row {}: bad value `{c}`", i + 1)))
                    })
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Self::from_rows(labels, rows)
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(File::open(path)?))
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        self.write_csv(BufWriter::new(File::create(path)?))
    }
}

/// Tallies trips by (origin, destination) municipality.
pub fn build_od(trips: &[TripRecord], labels: &[String]) -> Result<ODMatrix> {
    let mut m = ODMatrix::zeros(labels.to_vec())?;
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let n = labels.len();
    for t in trips {
        let lookup = |mun: &str| index.get(mun).copied().ok_or_else(|| Error::UnknownMunicipality(mun.into()));
        let (o, d) = (lookup(&t.origin_municipality)?, lookup(&t.destination_municipality)?);
        m.counts[o * n + d] += 1.0;
    }
    Ok(m)
}

/// Element-wise arithmetic mean.
pub fn average_matrices(matrices: &[ODMatrix]) -> Result<ODMatrix> {
    let first = matrices.first().ok_or_else(|| Error::invalid("no matrices to average"))?;
    if matrices.iter().any(|m| m.labels != first.labels) {
        return Err(Error::LabelMismatch);
    }
    let k = matrices.len() as f64;
    let counts = (0..first.counts.len())
        .map(|i| matrices.iter().map(|m| m.counts[i]).sum::<f64>() / k)
        .collect();
    Ok(ODMatrix { labels: first.labels.clone(), counts, day: None })
}

/// Divides every row by its Euclidean norm; zero rows stay zero.
pub fn l2_normalize_rows(m: &ODMatrix) -> ODMatrix {
    let n = m.size();
    let mut out = m.clone();
    for row in out.counts.chunks_mut(n.max(1)) {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    out
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpearmanResult {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Spearman's rho over paired samples with average-rank ties, and a
/// two-sided p-value from the t approximation with `n - 2` degrees of freedom.
pub fn spearman_samples(a: &[f64], b: &[f64]) -> Result<SpearmanResult> {
    if a.len() != b.len() {
        return Err(Error::invalid("samples differ in length"));
    }
    let n = a.len();
    if n < 3 {
        return Err(Error::invalid(format!("need at least 3 pairs, got {n}")));
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let mean = (n as f64 + 1.0) / 2.0;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        let (dx, dy) = (x - mean, y - mean);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 {
        return Err(Error::DegenerateRanks("first sample is constant"));
    }
    if sbb == 0.0 {
        return Err(Error::DegenerateRanks("second sample is constant"));
    }
    let rho = (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0);
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::invalid(e.to_string()))?;
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
    };
    Ok(SpearmanResult { rho, p_value, n })
}

/// Rank correlation between two matrices over identical cells, optionally
/// leaving out the diagonal (intra-municipal trips).
pub fn spearman(a: &ODMatrix, b: &ODMatrix, include_diagonal: bool) -> Result<SpearmanResult> {
    if a.labels != b.labels {
        return Err(Error::LabelMismatch);
    }
    let n = a.size();
    let cells = (0..n * n).filter(|i| include_diagonal || i / n != i % n);
    let (xa, xb): (Vec<f64>, Vec<f64>) = cells.map(|i| (a.counts[i], b.counts[i])).unzip();
    spearman_samples(&xa, &xb)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
    /// Sum of the values that fell into each bin.
    pub sums: Vec<f64>,
}

impl Histogram {
    pub fn new(bin_width: f64) -> Self {
        Histogram { bin_width, counts: Vec::new(), sums: Vec::new() }
    }

    fn with_bins(bin_width: f64, bins: usize) -> Self {
        Histogram { bin_width, counts: vec![0; bins], sums: vec![0.0; bins] }
    }

    pub fn add(&mut self, value: f64) {
        let bin = (value.max(0.0) / self.bin_width).floor() as usize;
        if bin >= self.counts.len() {
            self.counts.resize(bin + 1, 0);
            self.sums.resize(bin + 1, 0.0);
        }
        self.counts[bin] += 1;
        self.sums[bin] += value;
    }

    pub fn mass(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn weighted_mean(&self) -> Option<f64> {
        let m = self.mass();
        (m > 0).then(|| self.sums.iter().sum::<f64>() / m as f64)
    }

    /// CSV `bin_start,bin_end,count,fraction`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bin_start", "bin_end", "count", "fraction"])?;
        let mass = self.mass();
        for (i, &c) in self.counts.iter().enumerate() {
            let frac = if mass == 0 { 0.0 } else { c as f64 / mass as f64 };
            w.write_record([
                (i as f64 * self.bin_width).to_string(),
                ((i + 1) as f64 * self.bin_width).to_string(),
                c.to_string(),
                frac.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fraction of the sample at or below `x`.
pub fn empirical_cdf(sorted: &[f64], x: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    Some(sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64)
}

/// Sample values at cumulative levels 0.00, 0.01, ..., 1.00.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CdfGrid {
    pub points: Vec<(f64, f64)>,
}

impl CdfGrid {
    pub fn from_sorted(sorted: &[f64]) -> Self {
        let points = (0..=100)
            .filter_map(|k| {
                let level = f64::from(k) / 100.0;
                quantile_sorted(sorted, level).map(|v| (level, v))
            })
            .collect();
        CdfGrid { points }
    }

    /// CSV `level,value`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["level", "value"])?;
        for (l, v) in &self.points {
            w.write_record([l.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariableStats {
    pub histogram: Histogram,
    /// Ascending sample.
    pub sorted: Vec<f64>,
    pub cdf: CdfGrid,
}

impl VariableStats {
    fn new(bin_width: f64, bins: usize, values: impl Iterator<Item = f64>) -> Self {
        let mut histogram = Histogram::with_bins(bin_width, bins);
        let mut sorted: Vec<f64> = values.collect();
        for &v in &sorted {
            histogram.add(v);
        }
        sorted.sort_by(f64::total_cmp);
        let cdf = CdfGrid::from_sorted(&sorted);
        VariableStats { histogram, sorted, cdf }
    }

    pub fn mean(&self) -> Option<f64> {
        (!self.sorted.is_empty()).then(|| self.sorted.iter().sum::<f64>() / self.sorted.len() as f64)
    }

    pub fn cdf_at(&self, x: f64) -> Option<f64> {
        empirical_cdf(&self.sorted, x)
    }
}

pub const MINUTES_PER_DAY: usize = 1440;

/// Distributions of trip start time (minutes since midnight, 1-min bins),
/// duration (1-min bins) and endpoint distance (100 m bins), plus the
/// per-minute share of the day's events.
#[derive(Clone, Debug, PartialEq)]
pub struct TripStats {
    pub trip_count: usize,
    pub start_time: VariableStats,
    pub duration: VariableStats,
    pub distance: VariableStats,
    /// `None` when there are no trips.
    pub mean_duration_min: Option<f64>,
    pub mean_distance_km: Option<f64>,
    pub event_frequency: Vec<f64>,
}

pub fn trip_stats(trips: &[TripRecord], events: impl IntoIterator<Item = NaiveDateTime>) -> TripStats {
    let minute = |t: NaiveDateTime| f64::from(t.num_seconds_from_midnight()) / 60.0;
    let start_time = VariableStats::new(1.0, MINUTES_PER_DAY, trips.iter().map(|t| minute(t.t_start)));
    let duration = VariableStats::new(1.0, 0, trips.iter().map(|t| t.duration_min));
    let distance = VariableStats::new(100.0, 0, trips.iter().map(|t| t.displacement_m));

    let mut per_minute = vec![0u64; MINUTES_PER_DAY];
    for t in events {
        per_minute[(t.num_seconds_from_midnight() / 60) as usize] += 1;
    }
    let total: u64 = per_minute.iter().sum();
    let event_frequency = per_minute
        .iter()
        .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
        .collect();

    TripStats {
        trip_count: trips.len(),
        mean_duration_min: duration.mean(),
        mean_distance_km: distance.mean().map(|m| m / 1000.0),
        start_time,
        duration,
        distance,
        event_frequency,
    }
}

impl TripStats {
    /// Writes `{day}_{variable}_{hist|cdf}.csv` for start_time, duration and
    /// distance, and `{day}_event_frequency_hist.csv`.
    pub fn write_dir(&self, dir: &Path, day: &str) -> Result<()> {
        let file = |var: &str, kind: &str| -> Result<BufWriter<File>> {
            Ok(BufWriter::new(File::create(dir.join(format!("{day}_{var}_{kind}.csv")))?))
        };
        for (var, s) in [("start_time", &self.start_time), ("duration", &self.duration), ("distance", &self.distance)] {
            s.histogram.write_csv(file(var, "hist")?)?;
            s.cdf.write_csv(file(var, "cdf")?)?;
        }
        let mut w = csv::Writer::from_writer(file("event_frequency", "hist")?);
        w.write_record(["minute", "fraction"])?;
        for (m, f) in self.event_frequency.iter().enumerate() {
            w.write_record([m.to_string(), f.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
