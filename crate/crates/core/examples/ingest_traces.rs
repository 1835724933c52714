//! Parse a CDR stream against an antenna registry and group it into
//! user-day traces.
//!
//! ```text
//! cargo run --example ingest_traces
//! ```

use cdr_journeys::ingest::{group_user_days, parse_cdr, AntennaRegistry, IngestOptions};

const ANTENNAS: &str = "\
antenna_id,lat,lon,zone_id,municipality_id
A1,-33.4500,-70.6600,Z1,M1
A2,-33.4520,-70.6580,Z1,M1
B1,-33.4100,-70.6000,Z2,M2
";

const CDR: &str = "\
user_id,antenna_id,timestamp,kind
alice,A1,2015-06-01T07:55:00,data
alice,A2,2015-06-01T08:10:00,call
alice,B1,2015-06-01T08:50:00,sms
bob,B1,2015-06-01T23:59:59,data
bob,B1,2015-06-02T00:00:01,data
bob,Q9,2015-06-02T00:30:00,data
carol,A1,2015-06-31T09:00:00,data
";

fn main() -> cdr_journeys::Result<()> {
    let registry = AntennaRegistry::from_reader(ANTENNAS.as_bytes())?;
    let (events, report) = parse_cdr(CDR.as_bytes(), &registry, &IngestOptions::default())?;
    println!(
        "rows={} accepted={} bad_timestamp={} unknown_antenna={}",
        report.rows, report.accepted, report.bad_timestamp, report.unknown_antenna
    );

    // midnight splits bob's two events into separate traces
    for trace in group_user_days(events) {
        let antennas: Vec<&str> =
            trace.events.iter().map(|e| registry.antenna(e.antenna).antenna_id.as_str()).collect();
        println!("{} {} {:?}", trace.user_id, trace.day, antennas);
    }
    Ok(())
}
