//! Hourly entropy per user-day and the three filter modes.
//!
//! ```text
//! cargo run --example entropy_filter
//! ```

use cdr_journeys::filters::{entropy_filter, entropy_of_counts, hourly_entropy, EntropyFilter, UserEntropy};
use cdr_journeys::ingest::group_user_days;
use cdr_journeys::synthcity::{generate, SynthConfig};

fn main() -> cdr_journeys::Result<()> {
    let mut counts = [0u64; 24];
    counts[8] = 4;
    counts[18] = 4;
    println!("two busy hours: h = {:.4} (ln 2 = {:.4})", entropy_of_counts(&counts)?, 2f64.ln());

    let city = generate(&SynthConfig { users: 200, ..Default::default() })?;
    let entropies: Vec<UserEntropy> =
        group_user_days(city.events).iter().map(hourly_entropy).collect::<cdr_journeys::Result<_>>()?;

    for filter in [
        EntropyFilter::default(),
        EntropyFilter::Quantile { low: 0.25, high: 0.90 },
        EntropyFilter::Off,
    ] {
        let out = entropy_filter(&entropies, filter)?;
        println!(
            "{filter:?}: cuts [{:.3}, {:.3}] keep {}/{}",
            out.low_cut, out.high_cut, out.retained_count, out.considered
        );
    }
    Ok(())
}
