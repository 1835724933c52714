//! CDR and antenna registry ingestion.
//!
//! Both inputs are plain CSV. The CDR log carries one event per row
//! (`user_id,antenna_id,timestamp,kind`) and the registry one antenna per
//! row (`antenna_id,lat,lon,zone_id,municipality_id`). A header row is
//! optional for either file.
//!
//! Timestamps are wall-clock times in the dataset's fixed timezone, so a
//! calendar day is simply the date part of the timestamp.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::LatLon;

pub const CDR_HEADER: [&str; 4] = ["user_id", "antenna_id", "timestamp", "kind"];
pub const REGISTRY_HEADER: [&str; 5] = ["antenna_id", "lat", "lon", "zone_id", "municipality_id"];
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Call,
    Sms,
    Data,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Call => "call",
            EventKind::Sms => "sms",
            EventKind::Data => "data",
        }
    }

    fn from_bytes(b: &[u8]) -> Option<Self> {
        match b {
            b"call" => Some(EventKind::Call),
            b"sms" => Some(EventKind::Sms),
            b"data" => Some(EventKind::Data),
            _ => None,
        }
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EventKind::from_bytes(s.as_bytes())
            .ok_or_else(|| Error::invalid(format!("unknown event kind `{s}`")))
    }
}

/// Index of an antenna inside an [`AntennaRegistry`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AntennaIdx(pub u32);

impl AntennaIdx {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AntennaRecord {
    pub antenna_id: String,
    pub lat: f64,
    pub lon: f64,
    pub zone_id: String,
    pub municipality_id: String,
}

impl AntennaRecord {
    pub fn position(&self) -> LatLon {
        LatLon::new(self.lat, self.lon)
    }
}

/// Validated, read-only set of antennas.
#[derive(Clone, Debug)]
pub struct AntennaRegistry {
    antennas: Vec<AntennaRecord>,
    by_id: HashMap<String, AntennaIdx>,
    municipalities: Vec<String>,
}

impl AntennaRegistry {
    /// Validates coordinates, id uniqueness and the zone → municipality
    /// nesting.
    pub fn from_records(antennas: Vec<AntennaRecord>) -> Result<Self> {
        if antennas.len() > u32::MAX as usize {
            return Err(Error::Registry("too many antennas".into()));
        }
        let mut by_id = HashMap::with_capacity(antennas.len());
        let mut zone_mun: HashMap<&str, &str> = HashMap::new();
        for (i, a) in antennas.iter().enumerate() {
            if a.antenna_id.is_empty() {
                return Err(Error::Registry(format!("empty antenna id on record {}", i + 1)));
            }
            if !(-90.0..=90.0).contains(&a.lat) || !(-180.0..=180.0).contains(&a.lon) {
                return Err(Error::Registry(format!(
                    "antenna `{}` has coordinates out of range ({}, {})",
                    a.antenna_id, a.lat, a.lon
                )));
            }
            if by_id.insert(a.antenna_id.clone(), AntennaIdx(i as u32)).is_some() {
                return Err(Error::Registry(format!("duplicate antenna id `{}`", a.antenna_id)));
            }
            match zone_mun.get(a.zone_id.as_str()) {
                Some(m) if *m != a.municipality_id => {
                    return Err(Error::Registry(format!(
                        "zone `{}` maps to municipalities `{}` and `{}`",
                        a.zone_id, m, a.municipality_id
                    )))
                }
                Some(_) => {}
                None => {
                    zone_mun.insert(&a.zone_id, &a.municipality_id);
                }
            }
        }
        let municipalities = antennas
            .iter()
            .map(|a| a.municipality_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(AntennaRegistry { antennas, by_id, municipalities })
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut records = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            if i == 0 && row.iter().eq(REGISTRY_HEADER.iter().copied()) {
                continue;
            }
            if row.len() != 5 {
                return Err(Error::Registry(format!(
                    "row {} has {} columns, expected 5",
                    i + 1,
                    row.len()
                )));
            }
            let coord = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| {
                    Error::Registry(format!("row {}: bad coordinate `{s}`", i + 1))
                })
            };
            records.push(AntennaRecord {
                antenna_id: row[0].to_string(),
                lat: coord(&row[1])?,
                lon: coord(&row[2])?,
                zone_id: row[3].to_string(),
                municipality_id: row[4].to_string(),
            });
        }
        Self::from_records(records)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => Error::RegistryNotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_reader(io::BufReader::new(file))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(REGISTRY_HEADER)?;
        for a in &self.antennas {
            w.write_record([
                a.antenna_id.as_str(),
                &a.lat.to_string(),
                &a.lon.to_string(),
                &a.zone_id,
                &a.municipality_id,
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.antennas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.antennas.is_empty()
    }

    pub fn lookup(&self, antenna_id: &str) -> Option<AntennaIdx> {
        self.by_id.get(antenna_id).copied()
    }

    pub fn get(&self, idx: AntennaIdx) -> Option<&AntennaRecord> {
        self.antennas.get(idx.index())
    }

    /// Panics when `idx` did not come from this registry.
    pub fn antenna(&self, idx: AntennaIdx) -> &AntennaRecord {
        &self.antennas[idx.index()]
    }

    pub fn position(&self, idx: AntennaIdx) -> LatLon {
        self.antennas[idx.index()].position()
    }

    pub fn iter(&self) -> impl Iterator<Item = (AntennaIdx, &AntennaRecord)> {
        self.antennas
            .iter()
            .enumerate()
            .map(|(i, a)| (AntennaIdx(i as u32), a))
    }

    /// Sorted unique municipality ids; the fixed label order of every OD
    /// matrix built against this registry.
    pub fn municipality_labels(&self) -> &[String] {
        &self.municipalities
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CdrEvent {
    pub user_id: Arc<str>,
    pub antenna: AntennaIdx,
    pub timestamp: NaiveDateTime,
    pub kind: EventKind,
}

/// Row accounting for one or more parsed CDR streams.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: u64,
    pub accepted: u64,
    pub bad_timestamp: u64,
    pub unknown_antenna: u64,
    pub malformed: u64,
}

impl IngestReport {
    pub fn rejected(&self) -> u64 {
        self.bad_timestamp + self.unknown_antenna + self.malformed
    }

    pub fn merge(&mut self, other: &IngestReport) {
        self.rows += other.rows;
        self.accepted += other.accepted;
        self.bad_timestamp += other.bad_timestamp;
        self.unknown_antenna += other.unknown_antenna;
        self.malformed += other.malformed;
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IngestOptions {
    /// Fraction of rejected rows above which the stream is treated as corrupt.
    pub reject_threshold: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { reject_threshold: 0.5 }
    }
}

/// Parses `YYYY-MM-DDTHH:MM:SS` without going through a locale-aware or
/// format-string parser.
pub fn parse_timestamp(b: &[u8]) -> Option<NaiveDateTime> {
    if b.len() != 19 || b[4] != b'-' || b[7] != b'-' || b[10] != b'T' || b[13] != b':' || b[16] != b':'
    {
        return None;
    }
    fn num(b: &[u8]) -> Option<u32> {
        b.iter().try_fold(0u32, |acc, &c| {
            c.is_ascii_digit().then(|| acc * 10 + u32::from(c - b'0'))
        })
    }
    let date = NaiveDate::from_ymd_opt(num(&b[0..4])? as i32, num(&b[5..7])?, num(&b[8..10])?)?;
    let time = NaiveTime::from_hms_opt(num(&b[11..13])?, num(&b[14..16])?, num(&b[17..19])?)?;
    Some(date.and_time(time))
}

/// Parses a CDR stream against `registry`.
///
/// Rows are rejected (and counted in the report) for a wrong column count,
/// an empty id, or an unknown kind (`malformed`), an unparseable timestamp
/// (`bad_timestamp`), or an antenna missing from the registry
/// (`unknown_antenna`). The whole stream fails when the rejected fraction
/// exceeds `opts.reject_threshold`.
pub fn parse_cdr<R: Read>(
    reader: R,
    registry: &AntennaRegistry,
    opts: &IngestOptions,
) -> Result<(Vec<CdrEvent>, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .buffer_capacity(1 << 16)
        .from_reader(reader);
    let mut report = IngestReport::default();
    let mut events = Vec::new();
    let mut users: HashMap<Box<[u8]>, Arc<str>> = HashMap::new();
    let mut record = csv::ByteRecord::new();
    let mut first = true;

    while rdr.read_byte_record(&mut record)? {
        if std::mem::take(&mut first) && record.iter().eq(CDR_HEADER.iter().map(|h| h.as_bytes())) {
            continue;
        }
        report.rows += 1;
        if record.len() != 4 || record[0].is_empty() || record[1].is_empty() {
            report.malformed += 1;
            continue;
        }
        let (Ok(user), Ok(antenna), Some(kind)) = (
            std::str::from_utf8(&record[0]),
            std::str::from_utf8(&record[1]),
            EventKind::from_bytes(&record[3]),
        ) else {
            report.malformed += 1;
            continue;
        };
        let Some(timestamp) = parse_timestamp(&record[2]) else {
            report.bad_timestamp += 1;
            continue;
        };
        let Some(antenna) = registry.lookup(antenna) else {
            report.unknown_antenna += 1;
            continue;
        };
        let user_id = match users.get(user.as_bytes()) {
            Some(u) => Arc::clone(u),
            None => {
                let u: Arc<str> = Arc::from(user);
                users.insert(user.as_bytes().into(), Arc::clone(&u));
                u
            }
        };
        events.push(CdrEvent { user_id, antenna, timestamp, kind });
        report.accepted += 1;
    }

    if report.rows > 0 && report.rejected() as f64 / report.rows as f64 > opts.reject_threshold {
        return Err(Error::CorruptInput {
            rows: report.rows,
            rejected: report.rejected(),
            threshold: opts.reject_threshold,
        });
    }
    Ok((events, report))
}

pub fn parse_cdr_path(
    path: &Path,
    registry: &AntennaRegistry,
    opts: &IngestOptions,
) -> Result<(Vec<CdrEvent>, IngestReport)> {
    let file = File::open(path)?;
    parse_cdr(io::BufReader::with_capacity(1 << 20, file), registry, opts)
}

/// Writes events in the headered CDR format read by [`parse_cdr`].
pub fn write_cdr_csv<W: Write>(
    writer: W,
    events: &[CdrEvent],
    registry: &AntennaRegistry,
) -> Result<()> {
    let mut w = io::BufWriter::new(writer);
    writeln!(w, "{}", CDR_HEADER.join(","))?;
    for e in events {
        writeln!(
            w,
            "{},{},{},{}",
            e.user_id,
            registry.antenna(e.antenna).antenna_id,
            e.timestamp.format(TIMESTAMP_FORMAT),
            e.kind.as_str()
        )?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub timestamp: NaiveDateTime,
    pub antenna: AntennaIdx,
    pub kind: EventKind,
}

/// Time-ordered events of one user on one calendar day.
#[derive(Clone, Debug, PartialEq)]
pub struct UserDayTrace {
    pub user_id: Arc<str>,
    pub day: NaiveDate,
    pub events: Vec<TraceEvent>,
}

impl UserDayTrace {
    pub fn to_events(&self) -> impl Iterator<Item = CdrEvent> + '_ {
        self.events.iter().map(|e| CdrEvent {
            user_id: Arc::clone(&self.user_id),
            antenna: e.antenna,
            timestamp: e.timestamp,
            kind: e.kind,
        })
    }
}

/// Groups events into one trace per (user, calendar day), sorted by
/// `(user_id, day)`. Within a trace events are sorted by timestamp; equal
/// timestamps keep input order.
pub fn group_user_days<I: IntoIterator<Item = CdrEvent>>(events: I) -> Vec<UserDayTrace> {
    let mut slots: HashMap<(Arc<str>, NaiveDate), usize> = HashMap::new();
    let mut traces: Vec<UserDayTrace> = Vec::new();
    for e in events {
        let day = e.timestamp.date();
        let slot = *slots.entry((Arc::clone(&e.user_id), day)).or_insert_with(|| {
            traces.push(UserDayTrace { user_id: Arc::clone(&e.user_id), day, events: Vec::new() });
            traces.len() - 1
        });
        traces[slot].events.push(TraceEvent {
            timestamp: e.timestamp,
            antenna: e.antenna,
            kind: e.kind,
        });
    }
    for t in &mut traces {
        t.events.sort_by_key(|e| e.timestamp);
    }
    traces.sort_by(|a, b| a.user_id.cmp(&b.user_id).then(a.day.cmp(&b.day)));
    traces
}
