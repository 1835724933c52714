//! Daily OD matrices from reconstructed journeys, averaged over days and
//! row-normalized.
//!
//! ```text
//! cargo run --example od_matrices
//! ```

use std::collections::BTreeSet;

use chrono::NaiveDate;

use cdr_journeys::config::{EntropyMode, PipelineConfig};
use cdr_journeys::geo::zone_quantiles;
use cdr_journeys::ingest::group_user_days;
use cdr_journeys::odflow::l2_normalize_rows;
use cdr_journeys::pipeline::{estimate_journeys, od_matrices};
use cdr_journeys::synthcity::{generate, SynthConfig};

fn main() -> cdr_journeys::Result<()> {
    let city = generate(&SynthConfig { users: 300, days: 3, ..Default::default() })?;
    let cfg = PipelineConfig { entropy_mode: EntropyMode::Off, ..Default::default() };
    let zq = zone_quantiles(&city.registry, cfg.quantile, cfg.dmin_floor_m)?;
    let traces = group_user_days(city.events);
    let js = estimate_journeys(&cfg, &city.registry, &zq, &traces)?;

    let days: Vec<NaiveDate> = traces.iter().map(|t| t.day).collect::<BTreeSet<_>>().into_iter().collect();
    let (daily, mean) = od_matrices(&js.journeys, &city.registry, &days)?;
    for m in &daily {
        println!("{}: {} trips", m.day.expect("daily matrix"), m.total());
    }

    let norm = l2_normalize_rows(&mean);
    let header: Vec<String> = mean.labels().iter().map(|l| format!("{l:>5}")).collect();
    println!("{:>5} {}", "", header.join(" "));
    for (i, label) in mean.labels().iter().enumerate() {
        let row: Vec<String> = norm.row(i).iter().map(|v| format!("{v:.3}")).collect();
        println!("{label:>5} {}", row.join(" "));
    }
    Ok(())
}
