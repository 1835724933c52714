//! Daily journey reconstruction from call detail records.
//!
//! Each user's day of CDR events becomes a graphical timetable (elapsed
//! time against accumulated distance between antennas). Simplifying the
//! timetable with Ramer-Douglas-Peucker leaves candidate turning points;
//! the segments between them are classified as trips, non-trips or unknown
//! activities and merged into a daily journey. Trips are then tallied into
//! per-day origin-destination matrices between municipalities.
//!
//! Modules follow the pipeline:
//!
//! - [`ingest`]: CDR and antenna registry parsing, user-day grouping
//! - [`geo`]: haversine distance, per-zone distance quantiles, `d_min`
//! - [`filters`]: hourly entropy and the entropy user filter
//! - [`timetable`]: timetables and RDP simplification
//! - [`journey`]: classification, merging, trip extraction
//! - [`odflow`]: OD matrices, Spearman comparison, trip statistics
//! - [`synthcity`]: synthetic city and ground truth for end-to-end checks
//! - [`pipeline`] and [`config`]: stage wiring used by the command-line tool

// `!(x > 0.0)` guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod filters;
pub mod geo;
pub mod ingest;
pub mod journey;
pub mod odflow;
pub mod pipeline;
pub mod quantile;
pub mod synthcity;
pub mod timetable;

pub use error::{Error, Result};
