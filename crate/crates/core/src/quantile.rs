//! Empirical quantiles with linear interpolation between order statistics.

use crate::error::{Error, Result};

/// Quantile of an ascending slice at level `q ∈ [0, 1]`, interpolating
/// between the order statistics around `h = (n - 1) q`.
///
/// Returns `None` for an empty slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let q = q.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    Some(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Sorts `values` in place and returns the quantile at level `q`.
pub fn quantile(values: &mut [f64], q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("quantile level {q} outside [0, 1]")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("NaN in quantile input"));
    }
    values.sort_by(f64::total_cmp);
    quantile_sorted(values, q).ok_or_else(|| Error::invalid("quantile of empty sample"))
}
