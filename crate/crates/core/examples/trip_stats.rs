//! Trip start-time, duration and distance distributions for one day.
//!
//! ```text
//! cargo run --example trip_stats
//! ```

use cdr_journeys::config::{EntropyMode, PipelineConfig};
use cdr_journeys::geo::zone_quantiles;
use cdr_journeys::ingest::group_user_days;
use cdr_journeys::pipeline::{day_stats, estimate_journeys, event_times_by_day};
use cdr_journeys::synthcity::{generate, SynthConfig};

fn main() -> cdr_journeys::Result<()> {
    let city = generate(&SynthConfig { users: 500, ..Default::default() })?;
    let cfg = PipelineConfig { entropy_mode: EntropyMode::Off, ..Default::default() };
    let zq = zone_quantiles(&city.registry, cfg.quantile, cfg.dmin_floor_m)?;
    let traces = group_user_days(city.events);
    let js = estimate_journeys(&cfg, &city.registry, &zq, &traces)?;

    let events = event_times_by_day(&traces);
    let days: Vec<_> = events.keys().copied().collect();
    for (summary, stats) in day_stats(&js.journeys, &city.registry, &days, &events) {
        println!(
            "{}: {} trips, mean {:.1} min, {:.2} km",
            summary.day,
            summary.trips,
            summary.mean_duration_min.unwrap_or(f64::NAN),
            summary.mean_distance_km.unwrap_or(f64::NAN)
        );
        for level in [10, 50, 90] {
            println!(
                "  p{level}: start {:>4.0} min  duration {:>4.0} min  distance {:>6.0} m",
                stats.start_time.cdf.points[level].1,
                stats.duration.cdf.points[level].1,
                stats.distance.cdf.points[level].1
            );
        }
        let peak = stats.event_frequency.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(m, _)| m);
        println!("  busiest minute: {:?}", peak);
    }
    Ok(())
}
