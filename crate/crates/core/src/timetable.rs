//! Graphical timetables and their Ramer-Douglas-Peucker simplification.
//!
//! A timetable plots a user's day as elapsed time (x) against accumulated
//! traveled distance (y). Dwelling produces flat runs, movement produces
//! ramps, and the corners between them are the candidate turning points
//! that survive simplification.

use std::io::Write;
use std::sync::Arc;

use chrono::{NaiveDate, NaiveDateTime, Timelike};

use crate::error::{Error, Result};
use crate::geo::haversine;
use crate::ingest::{AntennaIdx, AntennaRegistry, UserDayTrace};

pub const DEFAULT_EPSILON_M: f64 = 500.0;
/// Meters per minute; 6 km/h.
pub const DEFAULT_TIME_SCALE: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimetablePoint {
    /// Minutes since local midnight.
    pub t: f64,
    /// Meters traveled since the first event of the day.
    pub d: f64,
    pub antenna: AntennaIdx,
    pub timestamp: NaiveDateTime,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Timetable {
    pub user_id: Arc<str>,
    pub day: NaiveDate,
    pub points: Vec<TimetablePoint>,
}

pub fn minutes_since_midnight(ts: NaiveDateTime) -> f64 {
    f64::from(ts.num_seconds_from_midnight()) / 60.0
}

/// One point per event; `d` is the running sum of hops between
/// consecutive antennas.
pub fn build_timetable(trace: &UserDayTrace, registry: &AntennaRegistry) -> Result<Timetable> {
    let mut points = Vec::with_capacity(trace.events.len());
    let mut d = 0.0;
    let mut prev: Option<AntennaIdx> = None;
    for e in &trace.events {
        let pos = registry
            .get(e.antenna)
            .ok_or_else(|| Error::UnknownAntenna(format!("#{}", e.antenna.0)))?
            .position();
        if let Some(p) = prev {
            if p != e.antenna {
                d += haversine(registry.position(p), pos);
            }
        }
        prev = Some(e.antenna);
        points.push(TimetablePoint {
            t: minutes_since_midnight(e.timestamp),
            d,
            antenna: e.antenna,
            timestamp: e.timestamp,
        });
    }
    Ok(Timetable { user_id: Arc::clone(&trace.user_id), day: trace.day, points })
}

/// A split made while simplifying: `index` was the worst offender of the
/// chord `lo..=hi` with the given perpendicular `deviation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RdpSplit {
    pub index: usize,
    pub lo: usize,
    pub hi: usize,
    pub deviation: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RdpOutcome {
    /// Retained indices, ascending; always includes both endpoints.
    pub kept: Vec<usize>,
    pub splits: Vec<RdpSplit>,
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return (p.0 - a.0).hypot(p.1 - a.1);
    }
    let s = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0);
    (p.0 - (a.0 + s * dx)).hypot(p.1 - (a.1 + s * dy))
}

/// Ramer-Douglas-Peucker over planar points. An interior vertex is kept
/// when its distance to the current chord segment exceeds `epsilon`; the
/// worst offender is split on first, the lowest index winning ties.
pub fn rdp(points: &[(f64, f64)], epsilon: f64) -> RdpOutcome {
    let n = points.len();
    if n <= 2 {
        return RdpOutcome { kept: (0..n).collect(), splits: Vec::new() };
    }
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[n - 1] = true;
    let mut splits = Vec::new();
    let mut stack = vec![(0usize, n - 1)];
    while let Some((lo, hi)) = stack.pop() {
        if hi <= lo + 1 {
            continue;
        }
        let (a, b) = (points[lo], points[hi]);
        let mut worst = (lo, f64::NEG_INFINITY);
        for (i, &p) in points.iter().enumerate().take(hi).skip(lo + 1) {
            let dev = segment_distance(p, a, b);
            if dev > worst.1 {
                worst = (i, dev);
            }
        }
        if worst.1 > epsilon {
            keep[worst.0] = true;
            splits.push(RdpSplit { index: worst.0, lo, hi, deviation: worst.1 });
            stack.push((worst.0, hi));
            stack.push((lo, worst.0));
        }
    }
    let kept = keep.iter().enumerate().filter_map(|(i, &k)| k.then_some(i)).collect();
    RdpOutcome { kept, splits }
}

fn check_params(epsilon: f64, time_scale: f64) -> Result<()> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(time_scale > 0.0) {
        return Err(Error::invalid(format!("time scale must be positive, got {time_scale}")));
    }
    Ok(())
}

/// Indices into `tt.points` retained by simplification.
///
/// Consecutive points with identical `(t, d)` collapse onto the earliest
/// before RDP runs in the plane `(t * time_scale, d)`.
pub fn simplify_indices(tt: &Timetable, epsilon: f64, time_scale: f64) -> Result<Vec<usize>> {
    check_params(epsilon, time_scale)?;
    let mut origin = Vec::with_capacity(tt.points.len());
    let mut plane = Vec::with_capacity(tt.points.len());
    for (i, p) in tt.points.iter().enumerate() {
        let xy = (p.t * time_scale, p.d);
        if plane.last() == Some(&xy) {
            continue;
        }
        origin.push(i);
        plane.push(xy);
    }
    Ok(rdp(&plane, epsilon).kept.into_iter().map(|k| origin[k]).collect())
}

pub fn simplify_rdp(tt: &Timetable, epsilon: f64, time_scale: f64) -> Result<Timetable> {
    let kept = simplify_indices(tt, epsilon, time_scale)?;
    Ok(Timetable {
        user_id: Arc::clone(&tt.user_id),
        day: tt.day,
        points: kept.into_iter().map(|i| tt.points[i]).collect(),
    })
}

/// Plot-ready dump: `t_min,d_m,antenna_id,retained`.
pub fn write_debug_csv<W: Write>(
    writer: W,
    tt: &Timetable,
    retained: &[usize],
    registry: &AntennaRegistry,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t_min", "d_m", "antenna_id", "retained"])?;
    let mut r = retained.iter().peekable();
    for (i, p) in tt.points.iter().enumerate() {
        let kept = r.next_if(|&&k| k == i).is_some();
        w.write_record([
            p.t.to_string(),
            p.d.to_string(),
            registry.antenna(p.antenna).antenna_id.clone(),
            u8::from(kept).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
