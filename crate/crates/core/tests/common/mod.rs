//! Independent reference implementations and fixture builders shared by the
//! integration tests and the acceptance suite. Nothing here calls into the
//! library's algorithms; only its data types are used.

#![allow(dead_code)]

use std::sync::Arc;

use chrono::{NaiveDate, NaiveDateTime};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use cdr_journeys::ingest::{AntennaIdx, AntennaRecord};
use cdr_journeys::timetable::{Timetable, TimetablePoint};

pub const R_EARTH: f64 = 6_371_000.0;

pub fn day() -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 6, 1).unwrap()
}

pub fn at(minute: f64) -> NaiveDateTime {
    day().and_hms_opt(0, 0, 0).unwrap() + chrono::Duration::milliseconds((minute * 60_000.0).round() as i64)
}

/// atan2 form of the great-circle distance.
pub fn great_circle(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * R_EARTH * a.sqrt().atan2((1.0 - a).sqrt())
}

/// Sorts a copy and interpolates between the order statistics around
/// position `(n - 1) q`.
pub fn interpolated_quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = (v.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Brute-force Q per zone: all unordered pairs, sorted, interpolated.
pub fn zone_q_oracle(records: &[AntennaRecord], zone: &str, q: f64, floor: f64) -> f64 {
    let members: Vec<&AntennaRecord> = records.iter().filter(|r| r.zone_id == zone).collect();
    let mut d = Vec::new();
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            d.push(great_circle(members[i].lat, members[i].lon, members[j].lat, members[j].lon));
        }
    }
    if d.is_empty() {
        floor
    } else {
        interpolated_quantile(&d, q)
    }
}

/// Registry of `zones` zones spread over `municipalities`, with 0..=max
/// antennas per zone scattered within ~2 km of the zone's anchor.
pub fn random_registry(rng: &mut ChaCha8Rng, zones: usize, municipalities: usize, max_per_zone: usize) -> Vec<AntennaRecord> {
    let mut out = Vec::new();
    for z in 0..zones {
        let (lat0, lon0) = (rng.gen_range(-40.0..40.0), rng.gen_range(-120.0..120.0));
        let mun = format!("M{}", z % municipalities);
        for a in 0..rng.gen_range(1..=max_per_zone) {
            out.push(AntennaRecord {
                antenna_id: format!("z{z}a{a}"),
                lat: lat0 + rng.gen_range(-0.02..0.02),
                lon: lon0 + rng.gen_range(-0.02..0.02),
                zone_id: format!("Z{z}"),
                municipality_id: mun.clone(),
            });
        }
    }
    out
}

/// Distance from `p` to the closed segment `a`-`b`, via the projection
/// parameter and explicit endpoint cases.
fn seg_dist(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let ab = (b.0 - a.0, b.1 - a.1);
    let ap = (p.0 - a.0, p.1 - a.1);
    let len2 = ab.0 * ab.0 + ab.1 * ab.1;
    if len2 == 0.0 {
        return (ap.0 * ap.0 + ap.1 * ap.1).sqrt();
    }
    let t = (ap.0 * ab.0 + ap.1 * ab.1) / len2;
    if t <= 0.0 {
        (ap.0 * ap.0 + ap.1 * ap.1).sqrt()
    } else if t >= 1.0 {
        let bp = (p.0 - b.0, p.1 - b.1);
        (bp.0 * bp.0 + bp.1 * bp.1).sqrt()
    } else {
        let cx = a.0 + t * ab.0;
        let cy = a.1 + t * ab.1;
        ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
    }
}

fn rdp_rec(pts: &[(f64, f64)], lo: usize, hi: usize, eps: f64, keep: &mut Vec<bool>) {
    if hi <= lo + 1 {
        return;
    }
    let mut best = lo;
    let mut best_d = -1.0;
    for i in lo + 1..hi {
        let d = seg_dist(pts[i], pts[lo], pts[hi]);
        if d > best_d {
            best_d = d;
            best = i;
        }
    }
    if best_d > eps {
        keep[best] = true;
        rdp_rec(pts, lo, best, eps, keep);
        rdp_rec(pts, best, hi, eps, keep);
    }
}

/// Recursive RDP over planar points; returns kept indices.
pub fn rdp_oracle(pts: &[(f64, f64)], eps: f64) -> Vec<usize> {
    if pts.len() <= 2 {
        return (0..pts.len()).collect();
    }
    let mut keep = vec![false; pts.len()];
    keep[0] = true;
    keep[pts.len() - 1] = true;
    rdp_rec(pts, 0, pts.len() - 1, eps, &mut keep);
    (0..pts.len()).filter(|&i| keep[i]).collect()
}

/// Timetable-level oracle: drop points repeating the previous (t, d), run
/// RDP in the scaled plane and map back to original indices.
pub fn simplify_oracle(tt: &Timetable, eps: f64, time_scale: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = Vec::new();
    for (i, p) in tt.points.iter().enumerate() {
        if let Some(&j) = idx.last() {
            let q: &TimetablePoint = &tt.points[j];
            if q.t == p.t && q.d == p.d {
                continue;
            }
        }
        idx.push(i);
    }
    let pts: Vec<(f64, f64)> = idx.iter().map(|&i| (tt.points[i].t * time_scale, tt.points[i].d)).collect();
    rdp_oracle(&pts, eps).into_iter().map(|k| idx[k]).collect()
}

/// Random timetable of up to `max_len` points with occasional stationary
/// stretches and exact repeats.
pub fn random_timetable(rng: &mut ChaCha8Rng, max_len: usize) -> Timetable {
    let n = rng.gen_range(1..=max_len);
    let mut t = rng.gen_range(0.0..600.0);
    let mut d = 0.0;
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            match rng.gen_range(0..10) {
                0 => {}
                1..=3 => t += rng.gen_range(0.5..60.0),
                _ => {
                    t += rng.gen_range(0.5..60.0);
                    d += rng.gen_range(0.0..8000.0);
                }
            }
        }
        points.push(TimetablePoint { t, d, antenna: AntennaIdx(i as u32), timestamp: at(t) });
    }
    Timetable { user_id: Arc::from("u"), day: day(), points }
}

/// 1-based average ranks by counting: rank = 1 + #smaller + (#equal - 1) / 2.
pub fn brute_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

pub fn spearman_oracle(a: &[f64], b: &[f64]) -> f64 {
    pearson(&brute_ranks(a), &brute_ranks(b))
}

/// Entropy filter in quantile mode by sorting: cut values by interpolation,
/// then keep every value inside the closed interval. Returns kept positions
/// in input order.
pub fn quantile_filter_oracle(h: &[f64], low: f64, high: f64) -> Vec<usize> {
    let lo = interpolated_quantile(h, low);
    let hi = interpolated_quantile(h, high);
    (0..h.len()).filter(|&i| h[i] >= lo && h[i] <= hi).collect()
}

/// Sort-and-slice variant for distinct values: ranks ceil((n-1)a) through
/// floor((n-1)b) of the sorted sample.
pub fn sorted_slice(h: &[f64], low: f64, high: f64) -> Vec<f64> {
    let mut v = h.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n1 = (v.len() - 1) as f64;
    let (a, b) = ((n1 * low).ceil() as usize, (n1 * high).floor() as usize);
    if a > b {
        Vec::new()
    } else {
        v[a..=b].to_vec()
    }
}

pub fn shannon(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum()
}
