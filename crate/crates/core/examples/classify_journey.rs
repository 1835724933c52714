//! Turn one user-day into a daily journey of trips and non-trips, and show
//! how the sandwich rule folds a short stop into the surrounding trip.
//!
//! ```text
//! cargo run --example classify_journey
//! ```

use chrono::NaiveDate;

use cdr_journeys::geo::{zone_quantiles, DEFAULT_FLOOR_M, DEFAULT_QUANTILE};
use cdr_journeys::ingest::{group_user_days, parse_cdr, AntennaIdx, AntennaRegistry, IngestOptions};
use cdr_journeys::journey::{
    extract_trips, merge_activities, reconstruct, Activity, ActivityKind, ClassifierConfig, Endpoint, JourneyConfig,
};

const ANTENNAS: &str = "\
H1,-33.4500,-70.6600,home,M1
H2,-33.4510,-70.6590,home,M1
R1,-33.4350,-70.6350,road,M2
W1,-33.4200,-70.6100,work,M3
W2,-33.4210,-70.6110,work,M3
";

const CDR: &str = "\
u1,H1,2015-06-01T07:00:00,data
u1,H2,2015-06-01T07:45:00,data
u1,H1,2015-06-01T08:00:00,call
u1,R1,2015-06-01T08:20:00,data
u1,W1,2015-06-01T08:45:00,data
u1,W2,2015-06-01T12:00:00,sms
u1,W1,2015-06-01T17:30:00,data
u1,R1,2015-06-01T17:55:00,data
u1,H1,2015-06-01T18:20:00,data
u1,H1,2015-06-01T21:00:00,data
";

fn main() -> cdr_journeys::Result<()> {
    let registry = AntennaRegistry::from_reader(ANTENNAS.as_bytes())?;
    let zq = zone_quantiles(&registry, DEFAULT_QUANTILE, DEFAULT_FLOOR_M)?;
    let (events, _) = parse_cdr(CDR.as_bytes(), &registry, &IngestOptions::default())?;
    let trace = &group_user_days(events)[0];

    let journey = reconstruct(trace, &registry, &zq, &JourneyConfig::default())?;
    for a in &journey.activities {
        println!(
            "{:<8} {} -> {}  {:>5.0} min",
            a.kind,
            a.origin.time.time(),
            a.destination.time.time(),
            a.duration_min()
        );
    }
    let (trips, _) = extract_trips(&journey, &registry);
    for t in &trips {
        println!("trip {} -> {} ({:.1} km)", t.origin_municipality, t.destination_municipality, t.displacement_m / 1e3);
    }

    // trip, 10 minute stop, trip: the stop is absorbed
    let day = NaiveDate::from_ymd_opt(2015, 6, 1).expect("date");
    let at = |m: u32, a: u32| Endpoint { time: day.and_hms_opt(8 + m / 60, m % 60, 0).expect("time"), antenna: AntennaIdx(a) };
    let chain = [
        Activity { kind: ActivityKind::Trip, origin: at(0, 0), destination: at(20, 1) },
        Activity { kind: ActivityKind::NonTrip, origin: at(20, 1), destination: at(30, 1) },
        Activity { kind: ActivityKind::Trip, origin: at(30, 1), destination: at(55, 2) },
    ];
    let merged = merge_activities(&chain, &ClassifierConfig::default())?;
    println!("sandwich: {} activities -> {} {}", chain.len(), merged.len(), merged[0].kind);
    Ok(())
}
