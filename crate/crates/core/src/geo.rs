//! Great-circle distances and per-zone antenna distance quantiles.
//!
//! Within each zone the pairwise distances between its antennas are
//! summarised by a single quantile. The minimum displacement a segment
//! needs before it can count as a trip between two zones is the larger of
//! the two zone quantiles; anything shorter is indistinguishable from a
//! handset hopping between antennas of the same area.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{AntennaIdx, AntennaRegistry};
use crate::quantile::quantile_sorted;

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

pub const DEFAULT_QUANTILE: f64 = 0.8;
pub const DEFAULT_FLOOR_M: f64 = 500.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        LatLon { lat, lon }
    }
}

/// Haversine distance in meters.
pub fn haversine(a: LatLon, b: LatLon) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZoneDistanceStats {
    pub zone_id: String,
    pub antenna_count: usize,
    /// Meters.
    pub q_value: f64,
}

/// Zone quantiles for a registry, plus a per-antenna lookup used on the
/// hot path of journey reconstruction.
#[derive(Clone, Debug)]
pub struct ZoneQuantiles {
    zones: BTreeMap<String, ZoneDistanceStats>,
    by_antenna: Vec<f64>,
    pub q: f64,
    pub floor_m: f64,
}

/// Computes `Q(D_z)` for every zone: the `q`-quantile of the unordered
/// pairwise distances between the zone's antennas. Zones with fewer than
/// two antennas get `floor_m`.
pub fn zone_quantiles(registry: &AntennaRegistry, q: f64, floor_m: f64) -> Result<ZoneQuantiles> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("quantile level {q} outside (0, 1)")));
    }
    if !(floor_m >= 0.0) {
        return Err(Error::invalid(format!("negative distance floor {floor_m}")));
    }
    let mut members: BTreeMap<&str, Vec<AntennaIdx>> = BTreeMap::new();
    for (idx, a) in registry.iter() {
        members.entry(a.zone_id.as_str()).or_default().push(idx);
    }
    let mut zones = BTreeMap::new();
    for (zone, ants) in members {
        let q_value = if ants.len() < 2 {
            floor_m
        } else {
            let mut d = Vec::with_capacity(ants.len() * (ants.len() - 1) / 2);
            for (i, &a) in ants.iter().enumerate() {
                for &b in &ants[i + 1..] {
                    d.push(haversine(registry.position(a), registry.position(b)));
                }
            }
            d.sort_by(f64::total_cmp);
            quantile_sorted(&d, q).unwrap_or(floor_m)
        };
        zones.insert(
            zone.to_string(),
            ZoneDistanceStats { zone_id: zone.to_string(), antenna_count: ants.len(), q_value },
        );
    }
    let by_antenna = registry.iter().map(|(_, a)| zones[&a.zone_id].q_value).collect();
    Ok(ZoneQuantiles { zones, by_antenna, q, floor_m })
}

impl ZoneQuantiles {
    pub fn get(&self, zone_id: &str) -> Option<&ZoneDistanceStats> {
        self.zones.get(zone_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ZoneDistanceStats> {
        self.zones.values()
    }

    pub fn len(&self) -> usize {
        self.zones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }

    /// `d_min = max(Q(D_o), Q(D_d))`.
    pub fn min_trip_distance(&self, zone_o: &str, zone_d: &str) -> Result<f64> {
        let q = |z: &str| {
            self.zones
                .get(z)
                .map(|s| s.q_value)
                .ok_or_else(|| Error::UnknownZone(z.to_string()))
        };
        Ok(q(zone_o)?.max(q(zone_d)?))
    }

    /// Same as [`min_trip_distance`](Self::min_trip_distance), keyed by the
    /// endpoint antennas' zones.
    #[inline]
    pub fn min_trip_distance_between(&self, a: AntennaIdx, b: AntennaIdx) -> f64 {
        self.by_antenna[a.index()].max(self.by_antenna[b.index()])
    }

    pub fn mean_q(&self) -> Option<f64> {
        if self.zones.is_empty() {
            return None;
        }
        Some(self.zones.values().map(|s| s.q_value).sum::<f64>() / self.zones.len() as f64)
    }

    /// CSV `zone_id,antenna_count,q_value_m`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["zone_id", "antenna_count", "q_value_m"])?;
        for s in self.zones.values() {
            w.write_record([&s.zone_id, &s.antenna_count.to_string(), &s.q_value.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::AntennaRecord;

    #[test]
    fn one_degree_of_longitude_on_the_equator() {
        let d = haversine(LatLon::new(0.0, 0.0), LatLon::new(0.0, 1.0));
        let arc = 2.0 * std::f64::consts::PI * EARTH_RADIUS_M / 360.0;
        assert!((d - arc).abs() < 1e-6);
        assert!((d - 111_195.0).abs() < 5.0);
    }

    #[test]
    fn identity_is_zero() {
        let p = LatLon::new(-33.45, -70.65);
        assert_eq!(haversine(p, p), 0.0);
    }

    #[test]
    fn antipodes_do_not_nan() {
        let d = haversine(LatLon::new(0.0, 0.0), LatLon::new(0.0, 180.0));
        assert!((d - std::f64::consts::PI * EARTH_RADIUS_M).abs() < 1e-3);
    }

    fn rec(id: &str, lat: f64, lon: f64, zone: &str) -> AntennaRecord {
        AntennaRecord {
            antenna_id: id.into(),
            lat,
            lon,
            zone_id: zone.into(),
            municipality_id: format!("m-{zone}"),
        }
    }

    #[test]
    fn degenerate_and_pair_zones() {
        // 1 km north of the equator is 1000 / (pi R / 180) degrees
        let km = 1000.0 / (std::f64::consts::PI * EARTH_RADIUS_M / 180.0);
        let reg = AntennaRegistry::from_records(vec![
            rec("a", 0.0, 0.0, "solo"),
            rec("b", 0.0, 10.0, "pair"),
            rec("c", km, 10.0, "pair"),
        ])
        .unwrap();
        for q in [0.1, 0.5, 0.8, 0.99] {
            let zq = zone_quantiles(&reg, q, 500.0).unwrap();
            assert_eq!(zq.get("solo").unwrap().q_value, 500.0);
            assert_eq!(zq.get("solo").unwrap().antenna_count, 1);
            assert!((zq.get("pair").unwrap().q_value - 1000.0).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_levels_outside_open_interval() {
        let reg = AntennaRegistry::from_records(vec![rec("a", 0.0, 0.0, "z")]).unwrap();
        for q in [0.0, 1.0, -0.1, 1.1, f64::NAN] {
            assert!(zone_quantiles(&reg, q, 500.0).is_err());
        }
    }

    #[test]
    fn min_trip_distance_is_the_max() {
        let reg = AntennaRegistry::from_records(vec![
            rec("a", 0.0, 0.0, "z1"),
            rec("b", 0.0, 0.0027, "z1"),
            rec("c", 1.0, 0.0, "z2"),
        ])
        .unwrap();
        let zq = zone_quantiles(&reg, 0.8, 700.0).unwrap();
        let z1 = zq.get("z1").unwrap().q_value;
        assert!(z1 < 700.0);
        assert_eq!(zq.min_trip_distance("z1", "z2").unwrap(), 700.0);
        assert_eq!(zq.min_trip_distance("z2", "z1").unwrap(), 700.0);
        assert_eq!(zq.min_trip_distance("z1", "z1").unwrap(), z1);
        assert!(matches!(zq.min_trip_distance("z1", "zz"), Err(Error::UnknownZone(_))));
        assert_eq!(zq.min_trip_distance_between(AntennaIdx(0), AntennaIdx(2)), 700.0);
    }
}
