use std::collections::HashMap;
use std::io::{Read, Write};

use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minute-resolution timestamp. Seconds are truncated on parse.
pub type Timestamp = NaiveDateTime;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";

/// One operated flight leg with its schedule and actual block times.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlightRecord {
    pub carrier_code: String,
    pub dep_airport: String,
    pub arr_airport: String,
    pub aircraft_type: String,
    pub tail_id: String,
    pub sobt: Timestamp,
    pub aobt: Timestamp,
    pub sibt: Timestamp,
    pub aibt: Timestamp,
}

pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    let parsed = NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S"))
        .ok()?;
    parsed.with_second(0)?.with_nanosecond(0)
}

pub fn format_timestamp(t: &Timestamp) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

/// Signed whole minutes from `from` to `to`.
pub fn minutes_between(from: &Timestamp, to: &Timestamp) -> i64 {
    (*to - *from).num_minutes()
}

/// Header names for each required field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub carrier_code: String,
    pub dep_airport: String,
    pub arr_airport: String,
    pub aircraft_type: String,
    pub tail_id: String,
    pub sobt: String,
    pub aobt: String,
    pub sibt: String,
    pub aibt: String,
    /// Year of operations; when set, records with a timestamp outside it are
    /// rejected.
    pub year: Option<i32>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            carrier_code: "carrier".into(),
            dep_airport: "dep_airport".into(),
            arr_airport: "arr_airport".into(),
            aircraft_type: "aircraft_type".into(),
            tail_id: "tail_id".into(),
            sobt: "sobt".into(),
            aobt: "aobt".into(),
            sibt: "sibt".into(),
            aibt: "aibt".into(),
            year: None,
        }
    }
}

impl ColumnMapping {
    fn names(&self) -> [&str; 9] {
        [
            &self.carrier_code,
            &self.dep_airport,
            &self.arr_airport,
            &self.aircraft_type,
            &self.tail_id,
            &self.sobt,
            &self.aobt,
            &self.sibt,
            &self.aibt,
        ]
    }
}

pub const CANONICAL_HEADER: [&str; 9] = [
    "carrier",
    "dep_airport",
    "arr_airport",
    "aircraft_type",
    "tail_id",
    "sobt",
    "aobt",
    "sibt",
    "aibt",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    /// 1-based line number in the source, header included.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOutcome {
    pub records: Vec<FlightRecord>,
    pub rejections: Vec<Rejection>,
}

impl ParseOutcome {
    /// One `line<TAB>reason` entry per rejected row.
    pub fn rejection_log(&self) -> String {
        self.rejections
            .iter()
            .map(|r| format!("{}\t{}\n", r.line, r.reason))
            .collect()
    }
}

/// Reads CSV flight records. Rows with a missing field, an unparseable
/// timestamp, a non-positive scheduled duration or a timestamp outside the
/// declared year are dropped and logged; a header lacking a mapped column is a
/// schema error.
pub fn parse_flight_records<R: Read>(source: R, schema: &ColumnMapping) -> Result<ParseOutcome> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let header = reader
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?
        .clone();
    let index: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    let mut positions = [0usize; 9];
    let mut missing = Vec::new();
    for (slot, name) in schema.names().iter().enumerate() {
        match index.get(name) {
            Some(&i) => positions[slot] = i,
            None => missing.push(name.to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Schema(format!("header lacks required columns: {}", missing.join(", "))));
    }

    let mut out = ParseOutcome::default();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let fields: Vec<&str> = positions.iter().map(|&i| row.get(i).unwrap_or("").trim()).collect();
        if let Some(slot) = fields.iter().position(|f| f.is_empty()) {
            out.rejections.push(Rejection {
                line,
                reason: format!("missing field {}", schema.names()[slot]),
            });
            continue;
        }
        let mut times = [Timestamp::default(); 4];
        let mut bad = None;
        for k in 0..4 {
            match parse_timestamp(fields[5 + k]) {
                Some(t) => times[k] = t,
                None => {
                    bad = Some(format!("unparseable timestamp in {}: {:?}", schema.names()[5 + k], fields[5 + k]));
                    break;
                }
            }
        }
        if let Some(reason) = bad {
            out.rejections.push(Rejection { line, reason });
            continue;
        }
        let [sobt, aobt, sibt, aibt] = times;
        if sibt <= sobt {
            out.rejections.push(Rejection {
                line,
                reason: "scheduled in-block not after scheduled off-block".into(),
            });
            continue;
        }
        if let Some(year) = schema.year {
            if times.iter().any(|t| t.year() != year) {
                out.rejections.push(Rejection {
                    line,
                    reason: format!("timestamp outside operating year {year}"),
                });
                continue;
            }
        }
        out.records.push(FlightRecord {
            carrier_code: fields[0].to_string(),
            dep_airport: fields[1].to_string(),
            arr_airport: fields[2].to_string(),
            aircraft_type: fields[3].to_string(),
            tail_id: fields[4].to_string(),
            sobt,
            aobt,
            sibt,
            aibt,
        });
    }
    Ok(out)
}

/// Writes records with the canonical header.
pub fn write_flight_records<W: Write>(sink: W, records: &[FlightRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(CANONICAL_HEADER)?;
    for r in records {
        w.write_record([
            r.carrier_code.as_str(),
            &r.dep_airport,
            &r.arr_airport,
            &r.aircraft_type,
            &r.tail_id,
            &format_timestamp(&r.sobt),
            &format_timestamp(&r.aobt),
            &format_timestamp(&r.sibt),
            &format_timestamp(&r.aibt),
        ])?;
    }
    w.flush().map_err(|e| Error::io("writing flight records", e))?;
    Ok(())
}
