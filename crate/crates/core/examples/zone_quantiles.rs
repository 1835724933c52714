//! Per-zone antenna spacing and the minimum trip distance it implies.
//!
//! ```text
//! cargo run --example zone_quantiles
//! ```

use cdr_journeys::geo::{zone_quantiles, DEFAULT_FLOOR_M, DEFAULT_QUANTILE};
use cdr_journeys::synthcity::{generate, SynthConfig};

fn main() -> cdr_journeys::Result<()> {
    let city = generate(&SynthConfig { users: 1, ..Default::default() })?;
    let zq = zone_quantiles(&city.registry, DEFAULT_QUANTILE, DEFAULT_FLOOR_M)?;

    for z in zq.iter().take(6) {
        println!("{:<10} antennas={} Q(0.8)={:.0} m", z.zone_id, z.antenna_count, z.q_value);
    }
    println!("mean Q over {} zones: {:.0} m", zq.len(), zq.mean_q().unwrap_or(f64::NAN));

    let zones: Vec<&str> = zq.iter().map(|z| z.zone_id.as_str()).collect();
    let (a, b) = (zones[0], zones[zones.len() - 1]);
    println!("d_min({a}, {b}) = {:.0} m", zq.min_trip_distance(a, b)?);
    Ok(())
}
