mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{Duration, NaiveDate};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cdr_journeys::ingest::{
    group_user_days, parse_cdr, write_cdr_csv, AntennaIdx, AntennaRecord, AntennaRegistry, CdrEvent, EventKind,
    IngestOptions,
};
use cdr_journeys::Error;

fn registry() -> AntennaRegistry {
    AntennaRegistry::from_reader(
        "antenna_id,lat,lon,zone_id,municipality_id\n\
         a1,-33.45,-70.66,Z1,M1\n\
         a2,-33.46,-70.65,Z1,M1\n\
         a3,-33.40,-70.60,Z2,M2\n"
            .as_bytes(),
    )
    .unwrap()
}

fn parse(text: &str) -> cdr_journeys::Result<(Vec<CdrEvent>, cdr_journeys::ingest::IngestReport)> {
    parse_cdr(text.as_bytes(), &registry(), &IngestOptions::default())
}

#[test]
fn single_row_maps_fields() {
    let (events, report) = parse("u1,a1,2015-06-01T08:00:00,data\n").unwrap();
    assert_eq!(events.len(), 1);
    assert_eq!(&*events[0].user_id, "u1");
    assert_eq!(events[0].antenna, AntennaIdx(0));
    assert_eq!(events[0].kind, EventKind::Data);
    assert_eq!(events[0].timestamp, common::day().and_hms_opt(8, 0, 0).unwrap());
    assert_eq!(report.accepted, 1);
}

#[test]
fn unknown_antenna_is_rejected_not_guessed() {
    let (events, report) = parse("u1,aX,2015-06-01T08:00:00,call\nu1,a1,2015-06-01T08:05:00,call\n").unwrap();
    assert_eq!(events.len(), 1);
    assert_eq!(report.unknown_antenna, 1);
}

#[test]
fn ten_rows_three_bad_timestamps() {
    let text = "\
user_id,antenna_id,timestamp,kind
u1,a1,2015-06-01T08:00:00,data
u1,a2,2015-06-01T08:15:00,call
u1,a3,2015-06-01 08:30:00,sms
u2,a1,2015-06-01T09:00:00,data
u2,a1,2015-13-01T09:15:00,data
u2,a3,2015-06-01T09:30:00,data
u3,a2,2015-06-01T10:00:00,sms
u3,a2,yesterday,call
u3,a1,2015-06-01T10:30:00,data
u3,a3,2015-06-01T10:45:00,data
";
    let (events, report) = parse(text).unwrap();
    assert_eq!(report.rows, 10);
    assert_eq!(events.len(), 7);
    assert_eq!(report.bad_timestamp, 3);
    assert_eq!(report.rejected(), 3);
}

#[test]
fn malformed_rows_are_counted() {
    let text = "u1,a1,2015-06-01T08:00:00\n,a1,2015-06-01T08:00:00,data\nu1,a1,2015-06-01T08:00:00,fax\nu1,a1,2015-06-01T08:00:00,sms\n";
    let lenient = IngestOptions { reject_threshold: 0.9 };
    let (events, report) = parse_cdr(text.as_bytes(), &registry(), &lenient).unwrap();
    assert_eq!(events.len(), 1);
    assert_eq!(report.malformed, 3);
}

#[test]
fn mostly_garbage_is_corrupt_input() {
    let err = parse("x\ny\nu1,a1,2015-06-01T08:00:00,data\n").unwrap_err();
    assert!(matches!(err, Error::CorruptInput { rows: 3, rejected: 2, .. }));
    let lenient = IngestOptions { reject_threshold: 0.9 };
    assert!(parse_cdr("x\ny\nu1,a1,2015-06-01T08:00:00,data\n".as_bytes(), &registry(), &lenient).is_ok());
}

#[test]
fn registry_validation() {
    let rec = |id: &str, lat: f64, zone: &str, mun: &str| AntennaRecord {
        antenna_id: id.into(),
        lat,
        lon: 0.0,
        zone_id: zone.into(),
        municipality_id: mun.into(),
    };
    assert!(AntennaRegistry::from_records(vec![rec("a", 91.0, "Z", "M")]).is_err());
    assert!(AntennaRegistry::from_records(vec![rec("a", 0.0, "Z", "M"), rec("a", 1.0, "Z", "M")]).is_err());
    assert!(AntennaRegistry::from_records(vec![rec("a", 0.0, "Z", "M1"), rec("b", 1.0, "Z", "M2")]).is_err());
    let ok = AntennaRegistry::from_records(vec![rec("b", 0.0, "Z2", "M2"), rec("a", 1.0, "Z1", "M1")]).unwrap();
    assert_eq!(ok.municipality_labels(), ["M1", "M2"]);
}

#[test]
fn missing_registry_file() {
    let err = AntennaRegistry::from_path(std::path::Path::new("/nonexistent/antennas.csv")).unwrap_err();
    assert!(err.to_string().contains("registry not found"));
}

#[test]
fn midnight_splits_days() {
    let (events, _) = parse("u1,a1,2015-06-01T23:50:00,data\nu1,a2,2015-06-02T00:10:00,data\n").unwrap();
    let traces = group_user_days(events);
    assert_eq!(traces.len(), 2);
    assert_eq!(traces[0].day, NaiveDate::from_ymd_opt(2015, 6, 1).unwrap());
    assert_eq!(traces[1].day, NaiveDate::from_ymd_opt(2015, 6, 2).unwrap());
}

#[test]
fn shuffled_single_day_is_sorted() {
    let (mut events, _) = parse(
        "u1,a1,2015-06-01T08:00:00,data\nu1,a2,2015-06-01T09:00:00,data\nu1,a3,2015-06-01T10:00:00,data\n\
         u1,a1,2015-06-01T11:00:00,data\nu1,a2,2015-06-01T12:00:00,data\n",
    )
    .unwrap();
    events.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
    let traces = group_user_days(events);
    assert_eq!(traces.len(), 1);
    assert_eq!(traces[0].events.len(), 5);
    assert!(traces[0].events.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
}

#[test]
fn equal_timestamps_keep_input_order() {
    let (events, _) =
        parse("u1,a3,2015-06-01T08:00:00,data\nu1,a1,2015-06-01T08:00:00,data\nu1,a2,2015-06-01T07:00:00,data\n").unwrap();
    let t = &group_user_days(events)[0];
    let ids: Vec<u32> = t.events.iter().map(|e| e.antenna.0).collect();
    assert_eq!(ids, [1, 2, 0]);
}

fn random_events(rng: &mut ChaCha8Rng, n: usize, users: usize, days: i64) -> Vec<CdrEvent> {
    let ids: Vec<Arc<str>> = (0..users).map(|u| Arc::from(format!("user{u}"))).collect();
    let start = common::day().and_hms_opt(0, 0, 0).unwrap();
    (0..n)
        .map(|_| CdrEvent {
            user_id: Arc::clone(&ids[rng.gen_range(0..users)]),
            antenna: AntennaIdx(rng.gen_range(0..3)),
            timestamp: start + Duration::seconds(rng.gen_range(0..days * 86_400)),
            kind: EventKind::Data,
        })
        .collect()
}

#[test]
fn thousand_events_match_brute_force_grouping() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let events = random_events(&mut rng, 1000, 3, 2);

    let mut oracle: BTreeMap<(String, NaiveDate), Vec<(chrono::NaiveDateTime, usize)>> = BTreeMap::new();
    for (i, e) in events.iter().enumerate() {
        oracle.entry((e.user_id.to_string(), e.timestamp.date())).or_default().push((e.timestamp, i));
    }
    let traces = group_user_days(events.clone());
    assert_eq!(traces.len(), 6);
    assert_eq!(traces.len(), oracle.len());
    for (t, ((user, day), mut expected)) in traces.iter().zip(oracle) {
        assert_eq!((&*t.user_id, t.day), (user.as_str(), day));
        expected.sort();
        assert_eq!(t.events.len(), expected.len());
        for (got, (ts, i)) in t.events.iter().zip(expected) {
            assert_eq!(got.timestamp, ts);
            assert_eq!(got.antenna, events[i].antenna);
        }
    }
}

#[test]
fn csv_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let events = random_events(&mut rng, 200, 4, 2);
    let mut buf = Vec::new();
    write_cdr_csv(&mut buf, &events, &registry()).unwrap();
    let (back, report) = parse_cdr(buf.as_slice(), &registry(), &IngestOptions::default()).unwrap();
    assert_eq!(report.rows, 200);
    assert_eq!(back, events);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn accounting_and_idempotent_grouping(seed in any::<u64>(), n in 0usize..300, bad in 0usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let events = random_events(&mut rng, n, 5, 3);
        let mut text = Vec::new();
        write_cdr_csv(&mut text, &events, &registry()).unwrap();
        for i in 0..bad {
            text.extend_from_slice(match i % 3 {
                0 => b"u9,a1,not-a-time,data\n".as_slice(),
                1 => b"u9,zz,2015-06-01T00:00:00,data\n".as_slice(),
                _ => b"broken\n".as_slice(),
            });
        }
        let opts = IngestOptions { reject_threshold: 1.0 };
        let (parsed, report) = parse_cdr(text.as_slice(), &registry(), &opts).unwrap();
        let traces = group_user_days(parsed);

        let total: usize = traces.iter().map(|t| t.events.len()).sum();
        prop_assert_eq!(total as u64 + report.rejected(), report.rows);
        prop_assert_eq!(report.rows as usize, n + bad);

        for t in &traces {
            prop_assert!(t.events.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
            prop_assert!(t.events.iter().all(|e| e.timestamp.date() == t.day));
        }
        let regrouped = group_user_days(traces.iter().flat_map(|t| t.to_events()).collect::<Vec<_>>());
        prop_assert_eq!(regrouped, traces);
    }
}
