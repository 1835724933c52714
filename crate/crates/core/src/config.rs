//! Pipeline configuration and its `key = value` file format.
//!
//! ```text
//! # Santiago, winter 2015
//! timezone = -03:00
//! epsilon_m = 500
//! entropy_mode = quantile
//! days = 2015-06-01,2015-06-02
//! ```
//!
//! Every key is optional; unknown keys are errors.

use std::path::Path;

use chrono::{FixedOffset, NaiveDate};

use crate::error::{Error, Result};
use crate::filters::EntropyFilter;
use crate::geo::{DEFAULT_FLOOR_M, DEFAULT_QUANTILE};
use crate::journey::JourneyConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntropyMode {
    Fixed,
    Quantile,
    Off,
}

impl std::str::FromStr for EntropyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(EntropyMode::Fixed),
            "quantile" => Ok(EntropyMode::Quantile),
            "off" => Ok(EntropyMode::Off),
            _ => Err(Error::invalid(format!("entropy mode `{s}` is not fixed, quantile or off"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub timezone: FixedOffset,
    pub journey: JourneyConfig,
    pub quantile: f64,
    pub dmin_floor_m: f64,
    pub entropy_mode: EntropyMode,
    /// Overrides the mode's default lower cut.
    pub entropy_low: Option<f64>,
    pub entropy_high: Option<f64>,
    /// Restrict processing to these days; `None` keeps all.
    pub days: Option<Vec<NaiveDate>>,
    pub workers: Option<usize>,
    pub reject_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            timezone: FixedOffset::east_opt(0).expect("zero offset"),
            journey: JourneyConfig::default(),
            quantile: DEFAULT_QUANTILE,
            dmin_floor_m: DEFAULT_FLOOR_M,
            entropy_mode: EntropyMode::Fixed,
            entropy_low: None,
            entropy_high: None,
            days: None,
            workers: None,
            reject_threshold: 0.5,
        }
    }
}

pub fn parse_offset(s: &str) -> Result<FixedOffset> {
    let bad = || Error::invalid(format!("timezone `{s}` is not of the form +HH:MM"));
    if s == "Z" || s.eq_ignore_ascii_case("utc") {
        return Ok(FixedOffset::east_opt(0).expect("zero offset"));
    }
    let (sign, rest) = match s.as_bytes().first() {
        Some(b'+') => (1, &s[1..]),
        Some(b'-') => (-1, &s[1..]),
        _ => return Err(bad()),
    };
    let (h, m) = rest.split_once(':').ok_or_else(bad)?;
    let (h, m): (i32, i32) = (h.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?);
    if !(0..60).contains(&m) {
        return Err(bad());
    }
    FixedOffset::east_opt(sign * (h * 3600 + m * 60)).ok_or_else(bad)
}

pub fn parse_days(s: &str) -> Result<Vec<NaiveDate>> {
    s.split(',')
        .map(str::trim)
        .filter(|d| !d.is_empty())
        .map(|d| {
            NaiveDate::parse_from_str(d, "%Y-%m-%d").map_err(|_| Error::invalid(format!("bad day `{d}`")))
        })
        .collect()
}

impl PipelineConfig {
    /// Sets one option by its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = || -> Result<f64> {
            value.parse::<f64>().map_err(|_| Error::invalid(format!("`{key}` expects a number, got `{value}`")))
        };
        let c = &mut self.journey.classifier;
        match key {
            "timezone" => self.timezone = parse_offset(value)?,
            "epsilon_m" => self.journey.epsilon_m = num()?,
            "time_scale" => self.journey.time_scale = num()?,
            "quantile" => self.quantile = num()?,
            "dmin_floor_m" => self.dmin_floor_m = num()?,
            "unknown_km" => c.unknown_km = num()?,
            "non_trip_min" => c.non_trip_min = num()?,
            "trip_min_duration" => c.trip_min_duration = num()?,
            "sandwich_min" => c.sandwich_min = num()?,
            "entropy_mode" => self.entropy_mode = value.parse()?,
            "entropy_low" => self.entropy_low = Some(num()?),
            "entropy_high" => self.entropy_high = Some(num()?),
            "days" => self.days = Some(parse_days(value)?),
            "workers" => {
                self.workers = Some(value.parse().map_err(|_| Error::invalid(format!("bad worker count `{value}`")))?)
            }
            "reject_threshold" => self.reject_threshold = num()?,
            _ => return Err(Error::invalid(format!("unknown option `{key}`"))),
        }
        Ok(())
    }

    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(k.trim(), v.trim())
                .map_err(|e| Error::Config { line: i + 1, message: e.to_string() })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        self.apply_str(&std::fs::read_to_string(path)?)
    }

    pub fn entropy_filter(&self) -> EntropyFilter {
        match self.entropy_mode {
            EntropyMode::Fixed => EntropyFilter::Fixed {
                low: self.entropy_low.unwrap_or(0.4),
                high: self.entropy_high.unwrap_or(0.9),
            },
            EntropyMode::Quantile => EntropyFilter::Quantile {
                low: self.entropy_low.unwrap_or(0.25),
                high: self.entropy_high.unwrap_or(0.90),
            },
            EntropyMode::Off => EntropyFilter::Off,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.journey.classifier;
        let positive = [
            ("epsilon_m", self.journey.epsilon_m),
            ("time_scale", self.journey.time_scale),
            ("quantile", self.quantile),
            ("dmin_floor_m", self.dmin_floor_m),
            ("unknown_km", c.unknown_km),
            ("non_trip_min", c.non_trip_min),
            ("trip_min_duration", c.trip_min_duration),
            ("sandwich_min", c.sandwich_min),
            ("reject_threshold", self.reject_threshold),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("`{name}` must be positive, got {v}")));
            }
        }
        if self.quantile >= 1.0 {
            return Err(Error::invalid("`quantile` must lie in (0, 1)"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("`workers` must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_method() {
        let c = PipelineConfig::default();
        assert_eq!(c.journey.classifier.unknown_km, 100.0);
        assert_eq!(c.journey.classifier.non_trip_min, 180.0);
        assert_eq!(c.journey.classifier.trip_min_duration, 15.0);
        assert_eq!(c.journey.classifier.sandwich_min, 15.0);
        assert_eq!(c.quantile, 0.8);
        assert_eq!(c.entropy_filter(), EntropyFilter::Fixed { low: 0.4, high: 0.9 });
        c.validate().unwrap();
    }

    #[test]
    fn parses_file_format() {
        let mut c = PipelineConfig::default();
        c.apply_str(
            "# comment\n\
             timezone = -03:00\n\
             epsilon_m = 250   # inline\n\
             \n\
             entropy_mode = quantile\n\
             days = 2015-06-01, 2015-06-02\n\
             workers = 3\n",
        )
        .unwrap();
        assert_eq!(c.timezone.local_minus_utc(), -3 * 3600);
        assert_eq!(c.journey.epsilon_m, 250.0);
        assert_eq!(c.entropy_filter(), EntropyFilter::Quantile { low: 0.25, high: 0.9 });
        assert_eq!(c.days.as_ref().unwrap().len(), 2);
        assert_eq!(c.workers, Some(3));
    }

    #[test]
    fn reports_line_numbers() {
        let mut c = PipelineConfig::default();
        let err = c.apply_str("epsilon_m = 3\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
        assert!(matches!(c.apply_str("no equals sign").unwrap_err(), Error::Config { line: 1, .. }));
    }

    #[test]
    fn later_values_override() {
        let mut c = PipelineConfig::default();
        c.apply_str("quantile = 0.7").unwrap();
        c.set("quantile", "0.9").unwrap();
        assert_eq!(c.quantile, 0.9);
    }

    #[test]
    fn offsets() {
        assert_eq!(parse_offset("+05:30").unwrap().local_minus_utc(), 5 * 3600 + 1800);
        assert_eq!(parse_offset("UTC").unwrap().local_minus_utc(), 0);
        assert!(parse_offset("05:00").is_err());
        assert!(parse_offset("+05:75").is_err());
    }

    #[test]
    fn validation() {
        let mut c = PipelineConfig::default();
        c.journey.epsilon_m = 0.0;
        assert!(c.validate().is_err());
        let c = PipelineConfig { quantile: 1.0, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
