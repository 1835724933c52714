//! Build a graphical timetable (minutes vs. accumulated distance) and
//! simplify it into turning points.
//!
//! ```text
//! cargo run --example timetable_rdp
//! ```

use std::io::stdout;

use cdr_journeys::ingest::{group_user_days, parse_cdr, AntennaRegistry, IngestOptions};
use cdr_journeys::timetable::{build_timetable, simplify_indices, write_debug_csv, DEFAULT_EPSILON_M, DEFAULT_TIME_SCALE};

const ANTENNAS: &str = "\
H1,-33.4500,-70.6600,home,M1
H2,-33.4510,-70.6590,home,M1
R1,-33.4350,-70.6350,road,M2
W1,-33.4200,-70.6100,work,M3
";

// home all morning, a 40 minute ride, work all afternoon
const CDR: &str = "\
u1,H1,2015-06-01T07:00:00,data
u1,H2,2015-06-01T07:30:00,data
u1,H1,2015-06-01T08:00:00,call
u1,R1,2015-06-01T08:20:00,data
u1,W1,2015-06-01T08:40:00,data
u1,W1,2015-06-01T10:00:00,sms
u1,W1,2015-06-01T13:00:00,data
";

fn main() -> cdr_journeys::Result<()> {
    let registry = AntennaRegistry::from_reader(ANTENNAS.as_bytes())?;
    let (events, _) = parse_cdr(CDR.as_bytes(), &registry, &IngestOptions::default())?;
    let trace = &group_user_days(events)[0];

    let tt = build_timetable(trace, &registry)?;
    let kept = simplify_indices(&tt, DEFAULT_EPSILON_M, DEFAULT_TIME_SCALE)?;
    println!("turning points: {kept:?}");
    write_debug_csv(stdout().lock(), &tt, &kept, &registry)
}
