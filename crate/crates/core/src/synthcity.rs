//! Synthetic city, ground-truth journeys and the CDR streams they emit.
//!
//! The city is a grid of square municipalities, each split into a grid of
//! square zones with antennas scattered around the zone centers. Users
//! alternate dwelling at an antenna site and moving in a straight line at
//! constant speed to the next site. While active, each user's handset logs
//! an event every `cadence_min` minutes on the antenna nearest to its true
//! position; with probability `jitter` the event lands on a random antenna
//! of the same zone instead.
//!
//! Two optional archetypes stress the classifier's outer rules. Vehicle SIMs
//! shuttle between two terminals all day and report only there, so their
//! whole day is one long steady movement. Wanderers take one slow walk of
//! 200 to 300 minutes with the handset idle until arrival.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`). The city is drawn from
//! stream 0 of the seed and user `i` from stream `i + 1`, so output is
//! independent of how users are scheduled across threads.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

use chrono::{Duration, FixedOffset, NaiveDate, NaiveDateTime};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geo::{haversine, LatLon, EARTH_RADIUS_M};
use crate::ingest::{write_cdr_csv, AntennaIdx, AntennaRecord, AntennaRegistry, CdrEvent, EventKind};
use crate::journey::{write_journeys_jsonl, Activity, ActivityKind, DailyJourney, Endpoint};
use crate::odflow::{build_od, spearman};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub first_day: NaiveDate,
    pub days: u32,
    pub municipalities: usize,
    pub zones_per_municipality: usize,
    pub antennas_per_zone: usize,
    /// Antennas are placed uniformly in a disc of this radius around the
    /// zone center (clipped to the zone cell).
    pub placement_radius_m: f64,
    pub municipality_size_m: f64,
    pub users: usize,
    pub trips_per_user: (u32, u32),
    pub speed_kmh: (f64, f64),
    pub trip_duration_min: (f64, f64),
    /// Shortest dwell between movements.
    pub min_dwell_min: f64,
    /// Minutes since midnight at which handsets become active.
    pub day_start_min: (f64, f64),
    pub day_end_min: (f64, f64),
    pub cadence_min: f64,
    pub jitter: f64,
    /// Share of users whose SIM rides a vehicle all day.
    pub vehicle_fraction: f64,
    /// Share of users taking one long, slow walk without logging events.
    pub wanderer_fraction: f64,
    pub center: LatLon,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            first_day: NaiveDate::from_ymd_opt(2015, 6, 1).expect("valid date"),
            days: 1,
            municipalities: 9,
            zones_per_municipality: 4,
            antennas_per_zone: 5,
            placement_radius_m: 800.0,
            municipality_size_m: 6000.0,
            users: 1000,
            trips_per_user: (2, 4),
            speed_kmh: (12.0, 40.0),
            trip_duration_min: (20.0, 90.0),
            min_dwell_min: 45.0,
            day_start_min: (360.0, 480.0),
            day_end_min: (1260.0, 1410.0),
            cadence_min: 15.0,
            jitter: 0.1,
            vehicle_fraction: 0.0,
            wanderer_fraction: 0.0,
            center: LatLon::new(-33.45, -70.65),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let range = |name: &str, (lo, hi): (f64, f64)| {
            if lo.is_finite() && hi.is_finite() && lo <= hi {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} range ({lo}, {hi}) is empty")))
            }
        };
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} {p} is not a probability")))
            }
        };
        if self.municipalities == 0 || self.zones_per_municipality == 0 || self.antennas_per_zone == 0 {
            return Err(Error::invalid("the city needs at least one antenna"));
        }
        if self.users == 0 {
            return Err(Error::invalid("at least one user is required"));
        }
        if self.days == 0 {
            return Err(Error::invalid("at least one day is required"));
        }
        if self.trips_per_user.0 > self.trips_per_user.1 {
            return Err(Error::invalid("trips per user range is empty"));
        }
        range("speed", self.speed_kmh)?;
        range("trip duration", self.trip_duration_min)?;
        range("day start", self.day_start_min)?;
        range("day end", self.day_end_min)?;
        if self.speed_kmh.0 <= 0.0 || self.trip_duration_min.0 <= 0.0 {
            return Err(Error::invalid("speeds and durations must be positive"));
        }
        if self.day_start_min.0 < 0.0 || self.day_end_min.1 >= 1440.0 || self.day_start_min.1 >= self.day_end_min.0 {
            return Err(Error::invalid("active hours must fit inside one day"));
        }
        if !(self.cadence_min > 0.0) || !(self.placement_radius_m >= 0.0) || !(self.municipality_size_m > 0.0) {
            return Err(Error::invalid("cadence, radius and municipality size must be positive"));
        }
        prob("jitter", self.jitter)?;
        prob("vehicle fraction", self.vehicle_fraction)?;
        prob("wanderer fraction", self.wanderer_fraction)?;
        prob("archetype total", self.vehicle_fraction + self.wanderer_fraction)?;
        Ok(())
    }
}

/// What the synthetic users actually did.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub journeys: Vec<DailyJourney>,
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub registry: AntennaRegistry,
    pub events: Vec<CdrEvent>,
    pub truth: GroundTruth,
}

impl SynthOutput {
    /// Writes `antennas.csv`, `cdr.csv` and `truth.jsonl` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.registry.write_csv(BufWriter::new(File::create(dir.join("antennas.csv"))?))?;
        write_cdr_csv(File::create(dir.join("cdr.csv"))?, &self.events, &self.registry)?;
        write_journeys_jsonl(
            BufWriter::new(File::create(dir.join("truth.jsonl"))?),
            &self.truth.journeys,
            &self.registry,
            FixedOffset::east_opt(0).expect("zero offset"),
        )
    }
}

/// Planar city in meters, x east and y north of the south-west corner.
struct City {
    registry: AntennaRegistry,
    xy: Vec<(f64, f64)>,
    zone_of: Vec<usize>,
    zone_members: Vec<Vec<AntennaIdx>>,
    /// Zone cells form a `grid_w x grid_h` grid of side `cell`.
    grid_w: usize,
    grid_h: usize,
    cell: f64,
    cell_zone: Vec<Option<usize>>,
}

fn grid_side(n: usize) -> usize {
    (1..).find(|s| s * s >= n).unwrap_or(1)
}

impl City {
    fn generate(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<City> {
        let mun_cols = grid_side(cfg.municipalities);
        let mun_rows = cfg.municipalities.div_ceil(mun_cols);
        let zone_cols = grid_side(cfg.zones_per_municipality);
        let cell = cfg.municipality_size_m / zone_cols as f64;
        let (grid_w, grid_h) = (mun_cols * zone_cols, mun_rows * zone_cols);
        let height = grid_h as f64 * cell;
        let width = grid_w as f64 * cell;
        let radius = cfg.placement_radius_m.min(cell / 2.0);

        let mut records = Vec::new();
        let mut xy = Vec::new();
        let mut zone_of = Vec::new();
        let mut zone_members = Vec::new();
        let mut cell_zone = vec![None; grid_w * grid_h];
        for m in 0..cfg.municipalities {
            let (mc, mr) = (m % mun_cols, m / mun_cols);
            for z in 0..cfg.zones_per_municipality {
                let (gx, gy) = (mc * zone_cols + z % zone_cols, mr * zone_cols + z / zone_cols);
                let zone = zone_members.len();
                cell_zone[gy * grid_w + gx] = Some(zone);
                let center = ((gx as f64 + 0.5) * cell, (gy as f64 + 0.5) * cell);
                let mut members = Vec::with_capacity(cfg.antennas_per_zone);
                for _ in 0..cfg.antennas_per_zone {
                    let r = radius * rng.gen::<f64>().sqrt();
                    let theta = rng.gen::<f64>() * std::f64::consts::TAU;
                    let p = (center.0 + r * theta.cos(), center.1 + r * theta.sin());
                    let ll = to_latlon(cfg.center, p, width, height);
                    members.push(AntennaIdx(records.len() as u32));
                    records.push(AntennaRecord {
                        antenna_id: format!("A{:05}", records.len() + 1),
                        lat: ll.lat,
                        lon: ll.lon,
                        zone_id: format!("M{:02}-Z{:02}", m + 1, z + 1),
                        municipality_id: format!("M{:02}", m + 1),
                    });
                    xy.push(p);
                    zone_of.push(zone);
                }
                zone_members.push(members);
            }
        }
        Ok(City {
            registry: AntennaRegistry::from_records(records)?,
            xy,
            zone_of,
            zone_members,
            grid_w,
            grid_h,
            cell,
            cell_zone,
        })
    }

    fn nearest(&self, p: (f64, f64)) -> AntennaIdx {
        let gx = ((p.0 / self.cell).floor().max(0.0) as usize).min(self.grid_w - 1);
        let gy = ((p.1 / self.cell).floor().max(0.0) as usize).min(self.grid_h - 1);
        let mut best = (AntennaIdx(0), f64::INFINITY);
        let max_ring = self.grid_w.max(self.grid_h);
        for ring in 0..=max_ring {
            if ring >= 2 && (ring - 1) as f64 * self.cell > best.1 {
                break;
            }
            let (x0, x1) = (gx as isize - ring as isize, gx as isize + ring as isize);
            let (y0, y1) = (gy as isize - ring as isize, gy as isize + ring as isize);
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    let on_ring = cy == y0 || cy == y1 || cx == x0 || cx == x1;
                    if !on_ring || cx < 0 || cy < 0 || cx as usize >= self.grid_w || cy as usize >= self.grid_h {
                        continue;
                    }
                    let Some(zone) = self.cell_zone[cy as usize * self.grid_w + cx as usize] else {
                        continue;
                    };
                    for &a in &self.zone_members[zone] {
                        let q = self.xy[a.index()];
                        let d = (q.0 - p.0).hypot(q.1 - p.1);
                        if d < best.1 {
                            best = (a, d);
                        }
                    }
                }
            }
        }
        best.0
    }

    fn planar_distance(&self, a: AntennaIdx, b: AntennaIdx) -> f64 {
        let (p, q) = (self.xy[a.index()], self.xy[b.index()]);
        (p.0 - q.0).hypot(p.1 - q.1)
    }
}

fn to_latlon(center: LatLon, p: (f64, f64), width: f64, height: f64) -> LatLon {
    let deg = 180.0 / std::f64::consts::PI;
    let lat = center.lat + (p.1 - height / 2.0) / EARTH_RADIUS_M * deg;
    let lon = center.lon + (p.0 - width / 2.0) / (EARTH_RADIUS_M * center.lat.to_radians().cos()) * deg;
    LatLon::new(lat, lon)
}

/// A stretch of the day during which the user sits still or moves in a
/// straight line, in seconds since midnight.
#[derive(Clone, Copy, Debug)]
struct Leg {
    kind: ActivityKind,
    start: i64,
    end: i64,
    from: AntennaIdx,
    to: AntennaIdx,
    /// Planar position of the start and end; movement is linear between them.
    from_xy: (f64, f64),
    to_xy: (f64, f64),
    /// No events are logged while on this leg.
    silent: bool,
}

/// How a day's legs turn into events.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Reporting {
    /// Every `cadence_min` from a random phase, nearest antenna, with jitter.
    Cadence,
    /// One event at each leg boundary on the boundary's own antenna.
    Stops,
}

impl Leg {
    fn position(&self, t: i64) -> (f64, f64) {
        if self.end <= self.start {
            return self.to_xy;
        }
        let f = ((t - self.start) as f64 / (self.end - self.start) as f64).clamp(0.0, 1.0);
        (self.from_xy.0 + f * (self.to_xy.0 - self.from_xy.0), self.from_xy.1 + f * (self.to_xy.1 - self.from_xy.1))
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Picks a destination at a distance reachable within the configured speed
/// and duration ranges, and the duration for getting there.
fn plan_trip(city: &City, cfg: &SynthConfig, rng: &mut ChaCha8Rng, from: AntennaIdx, home: Option<AntennaIdx>) -> Option<(AntennaIdx, f64)> {
    let (v_lo, v_hi) = (cfg.speed_kmh.0 * 1000.0 / 60.0, cfg.speed_kmh.1 * 1000.0 / 60.0);
    let (t_lo, t_hi) = cfg.trip_duration_min;
    let feasible = |to: AntennaIdx| {
        let d = city.planar_distance(from, to);
        let lo = t_lo.max(d / v_hi);
        let hi = t_hi.min(d / v_lo);
        (city.zone_of[to.index()] != city.zone_of[from.index()] && d > 0.0 && lo <= hi).then_some((lo, hi))
    };
    let pick = |rng: &mut ChaCha8Rng, to: AntennaIdx| feasible(to).map(|r| (to, uniform(rng, r)));
    if let Some(h) = home {
        if let Some(t) = pick(rng, h) {
            return Some(t);
        }
    }
    let n = city.registry.len();
    for _ in 0..200 {
        let to = AntennaIdx(rng.gen_range(0..n) as u32);
        if let Some(t) = pick(rng, to) {
            return Some(t);
        }
    }
    None
}

fn regular_day(city: &City, cfg: &SynthConfig, rng: &mut ChaCha8Rng, start: f64, end: f64) -> Vec<Leg> {
    let n = city.registry.len();
    let home = AntennaIdx(rng.gen_range(0..n) as u32);
    let wanted = rng.gen_range(cfg.trips_per_user.0..=cfg.trips_per_user.1) as usize;

    let mut stops = vec![home];
    let mut durations = Vec::new();
    for i in 0..wanted {
        let back_home = (i + 1 == wanted && wanted > 1).then_some(home);
        let Some((to, minutes)) = plan_trip(city, cfg, rng, *stops.last().expect("non-empty"), back_home) else {
            break;
        };
        stops.push(to);
        durations.push(minutes);
    }
    // drop trips until dwells of at least `min_dwell_min` fit around them
    while !durations.is_empty() {
        let dwell = end - start - durations.iter().sum::<f64>();
        if dwell >= (durations.len() + 1) as f64 * cfg.min_dwell_min {
            break;
        }
        durations.pop();
        stops.pop();
    }
    let slack = end - start - durations.iter().sum::<f64>() - (durations.len() + 1) as f64 * cfg.min_dwell_min;
    let weights: Vec<f64> = (0..=durations.len()).map(|_| rng.gen::<f64>() + 0.05).collect();
    let total_w: f64 = weights.iter().sum();

    let mut legs = Vec::new();
    let mut t = start;
    for (i, w) in weights.iter().enumerate() {
        let dwell = cfg.min_dwell_min + slack.max(0.0) * w / total_w;
        let at = stops[i];
        let dwell_end = if i == durations.len() { end } else { t + dwell };
        legs.push((ActivityKind::NonTrip, t, dwell_end, at, at));
        t = dwell_end;
        if let Some(&minutes) = durations.get(i) {
            legs.push((ActivityKind::Trip, t, t + minutes, at, stops[i + 1]));
            t += minutes;
        }
    }
    to_legs(city, legs, &[])
}

/// A SIM on a shuttle between two terminals, one hop per cadence tick at
/// 30 to 60 km/h, reporting only at the terminals.
fn vehicle_day(city: &City, cfg: &SynthConfig, rng: &mut ChaCha8Rng, start: f64, end: f64) -> Vec<Leg> {
    let n = city.registry.len();
    let hop = cfg.cadence_min.max(1.0);
    let reach = (30_000.0 / 60.0 * hop, 60_000.0 / 60.0 * hop);
    let a = AntennaIdx(rng.gen_range(0..n) as u32);
    let b = (0..200)
        .map(|_| AntennaIdx(rng.gen_range(0..n) as u32))
        .find(|&b| (reach.0..=reach.1).contains(&city.planar_distance(a, b)))
        .unwrap_or_else(|| {
            (0..n as u32).map(AntennaIdx).max_by(|&x, &y| city.planar_distance(a, x).total_cmp(&city.planar_distance(a, y))).expect("non-empty city")
        });
    let mut legs = Vec::new();
    let (mut t, mut at, mut other) = (start, a, b);
    while t + hop <= end || legs.is_empty() {
        legs.push((ActivityKind::Unknown, t, t + hop, at, other));
        t += hop;
        std::mem::swap(&mut at, &mut other);
    }
    to_legs(city, legs, &[])
}

fn wanderer_day(city: &City, rng: &mut ChaCha8Rng, start: f64, end: f64) -> Vec<Leg> {
    let n = city.registry.len();
    let from = AntennaIdx(rng.gen_range(0..n) as u32);
    let walk = uniform(rng, (200.0, 300.0)).min((end - start) * 0.8);
    let speed = uniform(rng, (10.0, 25.0)); // m/min
    let reach = walk * speed;
    let to = (0..200)
        .map(|_| AntennaIdx(rng.gen_range(0..n) as u32))
        .find(|&b| {
            let d = city.planar_distance(from, b);
            d > 0.5 * reach && d < 1.5 * reach && city.zone_of[b.index()] != city.zone_of[from.index()]
        })
        .unwrap_or(from);
    let lead = (end - start - walk) * rng.gen::<f64>();
    let legs = vec![
        (ActivityKind::NonTrip, start, start + lead, from, from),
        (ActivityKind::NonTrip, start + lead, start + lead + walk, from, to),
        (ActivityKind::NonTrip, start + lead + walk, end, to, to),
    ];
    // the handset stays idle during the walk
    to_legs(city, legs, &[1])
}

fn to_legs(city: &City, legs: Vec<(ActivityKind, f64, f64, AntennaIdx, AntennaIdx)>, silent: &[usize]) -> Vec<Leg> {
    legs.into_iter()
        .enumerate()
        .map(|(i, (kind, s, e, from, to))| Leg {
            kind,
            start: (s * 60.0).round() as i64,
            end: (e * 60.0).round() as i64,
            from,
            to,
            from_xy: city.xy[from.index()],
            to_xy: city.xy[to.index()],
            silent: silent.contains(&i),
        })
        .collect()
}

fn kind_for(rng: &mut ChaCha8Rng) -> EventKind {
    match rng.gen_range(0..20) {
        0..=2 => EventKind::Call,
        3..=5 => EventKind::Sms,
        _ => EventKind::Data,
    }
}

fn simulate_user(city: &City, cfg: &SynthConfig, user: usize, width: usize) -> (Vec<CdrEvent>, Vec<DailyJourney>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(user as u64 + 1);
    let user_id: Arc<str> = Arc::from(format!("u{:0width$}", user + 1));
    let archetype = rng.gen::<f64>();

    let mut events = Vec::new();
    let mut journeys = Vec::new();
    for day_offset in 0..cfg.days {
        let day = cfg.first_day + Duration::days(i64::from(day_offset));
        let midnight = day.and_hms_opt(0, 0, 0).expect("midnight");
        let start = uniform(&mut rng, cfg.day_start_min);
        let end = uniform(&mut rng, cfg.day_end_min);
        let (legs, reporting) = if archetype < cfg.vehicle_fraction {
            (vehicle_day(city, cfg, &mut rng, start, end), Reporting::Stops)
        } else if archetype < cfg.vehicle_fraction + cfg.wanderer_fraction {
            (wanderer_day(city, &mut rng, start, end), Reporting::Cadence)
        } else {
            (regular_day(city, cfg, &mut rng, start, end), Reporting::Cadence)
        };

        let at = |s: i64| -> NaiveDateTime { midnight + Duration::seconds(s) };
        let mut emit = |antenna: AntennaIdx, t: i64, rng: &mut ChaCha8Rng| {
            events.push(CdrEvent { user_id: Arc::clone(&user_id), antenna, timestamp: at(t), kind: kind_for(rng) });
        };
        match reporting {
            Reporting::Stops => {
                for l in &legs {
                    emit(l.from, l.start, &mut rng);
                }
                let l = legs[legs.len() - 1];
                emit(l.to, l.end, &mut rng);
            }
            Reporting::Cadence => {
                let cadence = (cfg.cadence_min * 60.0).round().max(1.0) as i64;
                let (first, last) = (legs[0].start, legs[legs.len() - 1].end);
                let mut t = first + rng.gen_range(0..cadence);
                let mut leg = 0;
                while t <= last {
                    while legs[leg].end < t {
                        leg += 1;
                    }
                    if !legs[leg].silent {
                        let mut antenna = city.nearest(legs[leg].position(t));
                        if rng.gen::<f64>() < cfg.jitter {
                            let members = &city.zone_members[city.zone_of[antenna.index()]];
                            antenna = *members.choose(&mut rng).expect("zone has antennas");
                        }
                        emit(antenna, t, &mut rng);
                    }
                    t += cadence;
                }
            }
        }

        let mut activities: Vec<Activity> = Vec::new();
        for l in &legs {
            let origin = Endpoint { time: at(l.start), antenna: l.from };
            let destination = Endpoint { time: at(l.end), antenna: l.to };
            match activities.last_mut() {
                Some(prev) if prev.kind == l.kind => prev.destination = destination,
                _ => activities.push(Activity { kind: l.kind, origin, destination }),
            }
        }
        journeys.push(DailyJourney { user_id: Arc::clone(&user_id), day, activities });
    }
    (events, journeys)
}

/// Deterministic in `cfg`; users are simulated in parallel.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0);
    let city = City::generate(cfg, &mut rng)?;
    let width = cfg.users.to_string().len().max(6);
    let per_user: Vec<_> = (0..cfg.users)
        .into_par_iter()
        .map(|u| simulate_user(&city, cfg, u, width))
        .collect();
    let mut events = Vec::new();
    let mut journeys = Vec::new();
    for (e, j) in per_user {
        events.extend(e);
        journeys.extend(j);
    }
    Ok(SynthOutput { registry: city.registry, events, truth: GroundTruth { journeys } })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub true_trips: usize,
    pub recovered_trips: usize,
    pub matched: usize,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    /// Spearman rho between recovered and true OD matrices.
    pub od_rho: Option<f64>,
    pub duration_mae_min: Option<f64>,
    pub distance_mae_m: Option<f64>,
}

fn overlaps(a: &Activity, b: &Activity) -> bool {
    a.origin.time <= b.destination.time && b.origin.time <= a.destination.time
}

/// Matches recovered trips to true trips of the same user and day: same
/// origin and destination municipalities and overlapping time spans, each
/// true trip used at most once, greedily in time order.
pub fn score_recovery(truth: &[DailyJourney], recovered: &[DailyJourney], registry: &AntennaRegistry) -> Result<RecoveryReport> {
    let mun = |a: AntennaIdx| registry.antenna(a).municipality_id.as_str();
    let dist = |a: &Activity| haversine(registry.position(a.origin.antenna), registry.position(a.destination.antenna));
    let trips = |j: &DailyJourney| -> Vec<Activity> {
        j.activities.iter().filter(|a| a.kind == ActivityKind::Trip).copied().collect()
    };

    let mut true_by_key: HashMap<(&str, NaiveDate), Vec<Activity>> = HashMap::new();
    for j in truth {
        true_by_key.entry((&j.user_id, j.day)).or_default().extend(trips(j));
    }
    let true_trips: usize = true_by_key.values().map(Vec::len).sum();

    let (mut recovered_trips, mut matched) = (0, 0);
    let (mut dur_err, mut dist_err) = (0.0, 0.0);
    let mut used: HashMap<(&str, NaiveDate), Vec<bool>> = HashMap::new();
    for j in recovered {
        let rec = trips(j);
        recovered_trips += rec.len();
        let key = (&*j.user_id, j.day);
        let Some(cands) = true_by_key.get(&key) else { continue };
        let flags = used.entry(key).or_insert_with(|| vec![false; cands.len()]);
        for r in &rec {
            let hit = cands.iter().enumerate().find(|(i, c)| {
                !flags[*i]
                    && mun(c.origin.antenna) == mun(r.origin.antenna)
                    && mun(c.destination.antenna) == mun(r.destination.antenna)
                    && overlaps(c, r)
            });
            if let Some((i, c)) = hit {
                flags[i] = true;
                matched += 1;
                dur_err += (c.duration_min() - r.duration_min()).abs();
                dist_err += (dist(c) - dist(r)).abs();
            }
        }
    }

    let labels = registry.municipality_labels();
    let od = |js: &[DailyJourney]| -> Result<_> {
        let recs: Vec<_> = js.iter().flat_map(|j| crate::journey::extract_trips(j, registry).0).collect();
        build_od(&recs, labels)
    };
    let od_rho = spearman(&od(truth)?, &od(recovered)?, true).ok().map(|r| r.rho);
    let ratio = |n: usize, d: usize| (d > 0).then(|| n as f64 / d as f64);
    Ok(RecoveryReport {
        true_trips,
        recovered_trips,
        matched,
        recall: ratio(matched, true_trips),
        precision: ratio(matched, recovered_trips),
        od_rho,
        duration_mae_min: (matched > 0).then(|| dur_err / matched as f64),
        distance_mae_m: (matched > 0).then(|| dist_err / matched as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig { users: 20, ..Default::default() }
    }

    #[test]
    fn rejects_empty_configs() {
        assert!(generate(&SynthConfig { users: 0, ..small() }).is_err());
        assert!(generate(&SynthConfig { antennas_per_zone: 0, ..small() }).is_err());
        assert!(generate(&SynthConfig { jitter: 1.5, ..small() }).is_err());
        assert!(generate(&SynthConfig { speed_kmh: (30.0, 10.0), ..small() }).is_err());
    }

    #[test]
    fn city_layout() {
        let out = generate(&small()).unwrap();
        assert_eq!(out.registry.len(), 9 * 4 * 5);
        assert_eq!(out.registry.municipality_labels().len(), 9);
    }

    #[test]
    fn nearest_matches_brute_force() {
        let cfg = small();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let city = City::generate(&cfg, &mut rng).unwrap();
        for _ in 0..2000 {
            let p = (rng.gen_range(-500.0..18_500.0), rng.gen_range(-500.0..18_500.0));
            let brute = (0..city.xy.len())
                .min_by(|&a, &b| {
                    let da = (city.xy[a].0 - p.0).hypot(city.xy[a].1 - p.1);
                    let db = (city.xy[b].0 - p.0).hypot(city.xy[b].1 - p.1);
                    da.total_cmp(&db)
                })
                .unwrap();
            let got = city.nearest(p);
            let d = |i: usize| (city.xy[i].0 - p.0).hypot(city.xy[i].1 - p.1);
            assert_eq!(d(got.index()), d(brute));
        }
    }

    #[test]
    fn self_match_is_perfect() {
        let out = generate(&small()).unwrap();
        let r = score_recovery(&out.truth.journeys, &out.truth.journeys, &out.registry).unwrap();
        assert!(r.true_trips > 0);
        assert_eq!(r.recall, Some(1.0));
        assert_eq!(r.precision, Some(1.0));
        assert_eq!(r.od_rho, Some(1.0));
        assert_eq!(r.duration_mae_min, Some(0.0));
    }

    #[test]
    fn empty_recovery_has_zero_recall() {
        let out = generate(&small()).unwrap();
        let r = score_recovery(&out.truth.journeys, &[], &out.registry).unwrap();
        assert_eq!(r.recall, Some(0.0));
        assert_eq!(r.precision, None);
        assert_eq!(r.od_rho, None);
    }
}
