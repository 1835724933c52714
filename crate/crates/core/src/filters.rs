//! Hourly Shannon entropy of user activity and the entropy-based user filter.

use std::io::Write;
use std::sync::Arc;

use chrono::{NaiveDate, Timelike};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::UserDayTrace;
use crate::quantile::quantile;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UserEntropy {
    pub user_id: Arc<str>,
    pub day: NaiveDate,
    /// Nats.
    pub h: f64,
    pub event_count: usize,
}

/// Entropy in nats of the distribution given by 24 hourly counts.
pub fn entropy_of_counts(counts: &[u64; 24]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::invalid("entropy of an empty event set"));
    }
    let total = total as f64;
    let h = -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            p * p.ln()
        })
        .sum::<f64>();
    // a single occupied bin is exactly zero, not -0.0
    Ok(h.max(0.0))
}

pub fn hourly_entropy(trace: &UserDayTrace) -> Result<UserEntropy> {
    let mut counts = [0u64; 24];
    for e in &trace.events {
        counts[e.timestamp.hour() as usize] += 1;
    }
    Ok(UserEntropy {
        user_id: Arc::clone(&trace.user_id),
        day: trace.day,
        h: entropy_of_counts(&counts)?,
        event_count: trace.events.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EntropyFilter {
    /// Keep users with `low <= h <= high`, in nats.
    Fixed { low: f64, high: f64 },
    /// Keep users between the empirical `low` and `high` quantiles.
    Quantile { low: f64, high: f64 },
    /// Keep everyone.
    Off,
}

impl Default for EntropyFilter {
    fn default() -> Self {
        EntropyFilter::Fixed { low: 0.4, high: 0.9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FilterOutcome {
    /// Entropy cut values actually applied.
    pub low_cut: f64,
    pub high_cut: f64,
    pub considered: usize,
    #[serde(skip)]
    pub retained: Vec<bool>,
    pub retained_count: usize,
}

/// Marks which entries of `entropies` survive the filter.
pub fn entropy_filter(entropies: &[UserEntropy], filter: EntropyFilter) -> Result<FilterOutcome> {
    let (low_cut, high_cut) = match filter {
        EntropyFilter::Fixed { low, high } => {
            if !(low < high) {
                return Err(Error::invalid(format!("entropy cut {low} is not below {high}")));
            }
            (low, high)
        }
        EntropyFilter::Quantile { low, high } => {
            if !(low < high) || low < 0.0 || high > 1.0 {
                return Err(Error::invalid(format!("bad quantile levels ({low}, {high})")));
            }
            if entropies.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                let mut h: Vec<f64> = entropies.iter().map(|e| e.h).collect();
                (quantile(&mut h, low)?, quantile(&mut h, high)?)
            }
        }
        EntropyFilter::Off => (f64::NEG_INFINITY, f64::INFINITY),
    };
    let retained: Vec<bool> = entropies.iter().map(|e| low_cut <= e.h && e.h <= high_cut).collect();
    Ok(FilterOutcome {
        low_cut,
        high_cut,
        considered: entropies.len(),
        retained_count: retained.iter().filter(|&&r| r).count(),
        retained,
    })
}

/// CSV `user_id,day,h,event_count`.
pub fn write_entropy_csv<W: Write>(writer: W, entropies: &[UserEntropy]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user_id", "day", "h", "event_count"])?;
    for e in entropies {
        w.write_record([&*e.user_id, &e.day.to_string(), &e.h.to_string(), &e.event_count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
