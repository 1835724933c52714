//! Activity classification, merging and daily journey assembly.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use chrono::{DateTime, FixedOffset, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{haversine, ZoneQuantiles};
use crate::ingest::{AntennaIdx, AntennaRegistry, UserDayTrace};
use crate::timetable::{build_timetable, simplify_rdp, Timetable, TimetablePoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityKind {
    Trip,
    NonTrip,
    Unknown,
}

impl ActivityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActivityKind::Trip => "trip",
            ActivityKind::NonTrip => "non_trip",
            ActivityKind::Unknown => "unknown",
        }
    }
}

impl fmt::Display for ActivityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifierConfig {
    /// Covered path length beyond which a segment is unknown.
    pub unknown_km: f64,
    /// Duration beyond which a displacement is still a non-trip.
    pub non_trip_min: f64,
    /// Shortest trip.
    pub trip_min_duration: f64,
    /// Longest non-trip absorbed between two trips.
    pub sandwich_min: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            unknown_km: 100.0,
            non_trip_min: 180.0,
            trip_min_duration: 15.0,
            sandwich_min: 15.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start: TimetablePoint,
    pub end: TimetablePoint,
    pub duration_min: f64,
    /// Chord between the endpoint antennas, meters.
    pub displacement_m: f64,
    /// Accumulated path length, meters.
    pub covered_m: f64,
}

impl Segment {
    pub fn new(start: TimetablePoint, end: TimetablePoint, registry: &AntennaRegistry) -> Self {
        Segment {
            start,
            end,
            duration_min: minutes_between(start.timestamp, end.timestamp),
            displacement_m: haversine(registry.position(start.antenna), registry.position(end.antenna)),
            covered_m: end.d - start.d,
        }
    }
}

fn minutes_between(a: NaiveDateTime, b: NaiveDateTime) -> f64 {
    (b - a).num_seconds() as f64 / 60.0
}

/// Segments between consecutive points of a (simplified) timetable.
pub fn segments(tt: &Timetable, registry: &AntennaRegistry) -> Vec<Segment> {
    tt.points.windows(2).map(|w| Segment::new(w[0], w[1], registry)).collect()
}

/// Rule order: unknown (covered > limit), non-trip (short displacement, or
/// long duration), trip (duration within limits), otherwise unknown.
pub fn classify_segment(seg: &Segment, d_min: f64, cfg: &ClassifierConfig) -> ActivityKind {
    if seg.covered_m > cfg.unknown_km * 1000.0 {
        ActivityKind::Unknown
    } else if seg.displacement_m < d_min || seg.duration_min > cfg.non_trip_min {
        ActivityKind::NonTrip
    } else if seg.duration_min >= cfg.trip_min_duration {
        ActivityKind::Trip
    } else {
        ActivityKind::Unknown
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Endpoint {
    pub time: NaiveDateTime,
    pub antenna: AntennaIdx,
}

impl From<TimetablePoint> for Endpoint {
    fn from(p: TimetablePoint) -> Self {
        Endpoint { time: p.timestamp, antenna: p.antenna }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Activity {
    pub kind: ActivityKind,
    pub origin: Endpoint,
    pub destination: Endpoint,
}

impl Activity {
    pub fn duration_min(&self) -> f64 {
        minutes_between(self.origin.time, self.destination.time)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DailyJourney {
    pub user_id: Arc<str>,
    pub day: NaiveDate,
    pub activities: Vec<Activity>,
}

impl DailyJourney {
    pub fn count(&self, kind: ActivityKind) -> usize {
        self.activities.iter().filter(|a| a.kind == kind).count()
    }

    /// Journeys with neither trips nor non-trips carry no usable diary.
    pub fn is_excluded(&self) -> bool {
        !self.activities.iter().any(|a| a.kind != ActivityKind::Unknown)
    }
}

/// Reclassifies short non-trips flanked by trips, then collapses runs of
/// equal kind into single activities.
///
/// The sandwich test runs once over maximal runs of equal kind, using the
/// run's total duration and its neighbours' original kinds; unknown runs
/// separate trips.
pub fn merge_activities(activities: &[Activity], cfg: &ClassifierConfig) -> Result<Vec<Activity>> {
    for (i, w) in activities.windows(2).enumerate() {
        if w[0].destination != w[1].origin {
            return Err(Error::NonContiguous(i + 1));
        }
    }
    if let Some(i) = activities.iter().position(|a| a.destination.time < a.origin.time) {
        return Err(Error::NonContiguous(i));
    }

    let mut runs: Vec<Activity> = Vec::new();
    for a in activities {
        match runs.last_mut() {
            Some(last) if last.kind == a.kind => last.destination = a.destination,
            _ => runs.push(*a),
        }
    }

    let kinds: Vec<ActivityKind> = runs.iter().map(|r| r.kind).collect();
    for i in 1..runs.len().saturating_sub(1) {
        if kinds[i] == ActivityKind::NonTrip
            && kinds[i - 1] == ActivityKind::Trip
            && kinds[i + 1] == ActivityKind::Trip
            && runs[i].duration_min() <= cfg.sandwich_min
        {
            runs[i].kind = ActivityKind::Trip;
        }
    }

    let mut merged: Vec<Activity> = Vec::with_capacity(runs.len());
    for r in runs {
        match merged.last_mut() {
            Some(last) if last.kind == r.kind => last.destination = r.destination,
            _ => merged.push(r),
        }
    }
    Ok(merged)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JourneyConfig {
    pub epsilon_m: f64,
    pub time_scale: f64,
    pub classifier: ClassifierConfig,
}

impl Default for JourneyConfig {
    fn default() -> Self {
        JourneyConfig {
            epsilon_m: crate::timetable::DEFAULT_EPSILON_M,
            time_scale: crate::timetable::DEFAULT_TIME_SCALE,
            classifier: ClassifierConfig::default(),
        }
    }
}

/// Classified segments of a simplified timetable, one activity each.
pub fn classify_timetable(
    simplified: &Timetable,
    registry: &AntennaRegistry,
    zq: &ZoneQuantiles,
    cfg: &ClassifierConfig,
) -> Vec<Activity> {
    segments(simplified, registry)
        .iter()
        .map(|s| Activity {
            kind: classify_segment(s, zq.min_trip_distance_between(s.start.antenna, s.end.antenna), cfg),
            origin: s.start.into(),
            destination: s.end.into(),
        })
        .collect()
}

/// Full per-trace reconstruction: timetable, simplification, segment
/// classification and merging.
pub fn reconstruct(
    trace: &UserDayTrace,
    registry: &AntennaRegistry,
    zq: &ZoneQuantiles,
    cfg: &JourneyConfig,
) -> Result<DailyJourney> {
    let tt = build_timetable(trace, registry)?;
    let simplified = simplify_rdp(&tt, cfg.epsilon_m, cfg.time_scale)?;
    let classified = classify_timetable(&simplified, registry, zq, &cfg.classifier);
    Ok(DailyJourney {
        user_id: Arc::clone(&trace.user_id),
        day: trace.day,
        activities: merge_activities(&classified, &cfg.classifier)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TripRecord {
    pub user_id: Arc<str>,
    pub day: NaiveDate,
    pub origin_municipality: String,
    pub destination_municipality: String,
    pub origin_antenna: AntennaIdx,
    pub destination_antenna: AntennaIdx,
    pub t_start: NaiveDateTime,
    pub duration_min: f64,
    pub displacement_m: f64,
}

/// One record per trip. The flag is set when the journey holds neither
/// trips nor non-trips.
pub fn extract_trips(j: &DailyJourney, registry: &AntennaRegistry) -> (Vec<TripRecord>, bool) {
    let trips = j
        .activities
        .iter()
        .filter(|a| a.kind == ActivityKind::Trip)
        .map(|a| {
            let (o, d) = (registry.antenna(a.origin.antenna), registry.antenna(a.destination.antenna));
            TripRecord {
                user_id: Arc::clone(&j.user_id),
                day: j.day,
                origin_municipality: o.municipality_id.clone(),
                destination_municipality: d.municipality_id.clone(),
                origin_antenna: a.origin.antenna,
                destination_antenna: a.destination.antenna,
                t_start: a.origin.time,
                duration_min: a.duration_min(),
                displacement_m: haversine(o.position(), d.position()),
            }
        })
        .collect();
    (trips, j.is_excluded())
}

#[derive(Debug, Serialize, Deserialize)]
struct ActivityLine {
    kind: ActivityKind,
    t_o: String,
    t_d: String,
    antenna_o: String,
    antenna_d: String,
    zone_o: String,
    zone_d: String,
    mun_o: String,
    mun_d: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct JourneyLine {
    user_id: String,
    day: NaiveDate,
    activities: Vec<ActivityLine>,
}

fn format_time(t: NaiveDateTime, offset: FixedOffset) -> String {
    // wall-clock time with the dataset offset attached
    format!("{}{}", t.format(crate::ingest::TIMESTAMP_FORMAT), offset)
}

/// JSON-lines, one journey per line.
pub fn write_journeys_jsonl<W: Write>(
    mut writer: W,
    journeys: &[DailyJourney],
    registry: &AntennaRegistry,
    offset: FixedOffset,
) -> Result<()> {
    for j in journeys {
        let line = JourneyLine {
            user_id: j.user_id.to_string(),
            day: j.day,
            activities: j
                .activities
                .iter()
                .map(|a| {
                    let (o, d) = (registry.antenna(a.origin.antenna), registry.antenna(a.destination.antenna));
                    ActivityLine {
                        kind: a.kind,
                        t_o: format_time(a.origin.time, offset),
                        t_d: format_time(a.destination.time, offset),
                        antenna_o: o.antenna_id.clone(),
                        antenna_d: d.antenna_id.clone(),
                        zone_o: o.zone_id.clone(),
                        zone_d: d.zone_id.clone(),
                        mun_o: o.municipality_id.clone(),
                        mun_d: d.municipality_id.clone(),
                    }
                })
                .collect(),
        };
        serde_json::to_writer(&mut writer, &line)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads journeys written by [`write_journeys_jsonl`], resolving antennas
/// against `registry`.
pub fn read_journeys_jsonl<R: BufRead>(reader: R, registry: &AntennaRegistry) -> Result<Vec<DailyJourney>> {
    let mut out = Vec::new();
    let mut users: std::collections::HashMap<String, Arc<str>> = Default::default();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let j: JourneyLine = serde_json::from_str(&line)?;
        let endpoint = |t: &str, a: &str| -> Result<Endpoint> {
            let time = DateTime::parse_from_rfc3339(t)
                .map_err(|e| Error::Journey(format!("line {}: time `{t}`: {e}", n + 1)))?
                .naive_local();
            let antenna = registry.lookup(a).ok_or_else(|| Error::UnknownAntenna(a.to_string()))?;
            Ok(Endpoint { time, antenna })
        };
        let activities = j
            .activities
            .iter()
            .map(|a| {
                Ok(Activity {
                    kind: a.kind,
                    origin: endpoint(&a.t_o, &a.antenna_o)?,
                    destination: endpoint(&a.t_d, &a.antenna_d)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let user_id = users.entry(j.user_id.clone()).or_insert_with(|| Arc::from(j.user_id.as_str()));
        out.push(DailyJourney { user_id: Arc::clone(user_id), day: j.day, activities });
    }
    Ok(out)
}
