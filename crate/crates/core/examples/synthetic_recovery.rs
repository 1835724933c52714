//! Generate a synthetic city, run the full pipeline on its CDR stream and
//! score the recovered trips against the ground truth.
//!
//! ```text
//! cargo run --release --example synthetic_recovery -- [users] [seed]
//! ```

use std::time::Instant;

use cdr_journeys::config::{EntropyMode, PipelineConfig};
use cdr_journeys::geo::zone_quantiles;
use cdr_journeys::ingest::group_user_days;
use cdr_journeys::pipeline::estimate_journeys;
use cdr_journeys::synthcity::{generate, score_recovery, SynthConfig};

fn main() -> cdr_journeys::Result<()> {
    let mut args = std::env::args().skip(1);
    let users = args.next().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(42);

    let start = Instant::now();
    let city = generate(&SynthConfig { users, seed, ..Default::default() })?;
    println!("{} antennas, {} events", city.registry.len(), city.events.len());

    // dense synthetic handsets sit far above the fixed entropy cuts
    let cfg = PipelineConfig { entropy_mode: EntropyMode::Off, ..Default::default() };
    let zq = zone_quantiles(&city.registry, cfg.quantile, cfg.dmin_floor_m)?;
    let js = estimate_journeys(&cfg, &city.registry, &zq, &group_user_days(city.events))?;
    let report = score_recovery(&city.truth.journeys, &js.journeys, &city.registry)?;

    println!("{}", serde_json::to_string_pretty(&report)?);
    println!("elapsed {:.2?}", start.elapsed());
    Ok(())
}
