use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{Datelike, Timelike};
use serde::{Deserialize, Serialize};

use super::record::{minutes_between, FlightRecord};
use crate::error::{Error, Result};

/// Ground-time ceiling; longer gaps are overnight parking, not a turnaround.
pub const MAX_TURNAROUND_MINUTES: i64 = 360;

/// Schedule-time information only. Nothing here may depend on actual block
/// times.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PreTacticalFeatures {
    pub carrier_code: String,
    pub dep_airport: String,
    pub arr_airport: String,
    pub aircraft_type: String,
    pub month: u32,
    pub day: u32,
    pub hour: u32,
    pub minute: u32,
    /// Monday = 0.
    pub day_of_week: u32,
    pub sched_duration: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledExample {
    pub features: PreTacticalFeatures,
    pub dep_delay: i64,
    pub arr_delay: i64,
    pub turnaround: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    DepDelay,
    ArrDelay,
    Turnaround,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::DepDelay, Target::ArrDelay, Target::Turnaround];

    pub fn name(self) -> &'static str {
        match self {
            Target::DepDelay => "dep_delay",
            Target::ArrDelay => "arr_delay",
            Target::Turnaround => "turnaround",
        }
    }

    pub fn of(self, ex: &LabeledExample) -> i64 {
        match self {
            Target::DepDelay => ex.dep_delay,
            Target::ArrDelay => ex.arr_delay,
            Target::Turnaround => ex.turnaround,
        }
    }

    pub fn set(self, ex: &mut LabeledExample, value: i64) {
        match self {
            Target::DepDelay => ex.dep_delay = value,
            Target::ArrDelay => ex.arr_delay = value,
            Target::Turnaround => ex.turnaround = value,
        }
    }
}

/// Column order of the labeled CSV: ten features then three targets.
pub const LABELED_COLUMNS: [&str; 13] = [
    "carrier",
    "dep_airport",
    "arr_airport",
    "aircraft_type",
    "month",
    "day",
    "hour",
    "minute",
    "day_of_week",
    "sched_duration",
    "dep_delay",
    "arr_delay",
    "turnaround",
];

pub const FEATURE_COUNT: usize = 10;

/// `(aobt - sobt, aibt - sibt)` in signed whole minutes.
pub fn compute_delays(rec: &FlightRecord) -> (i64, i64) {
    (minutes_between(&rec.sobt, &rec.aobt), minutes_between(&rec.sibt, &rec.aibt))
}

pub fn extract_features(rec: &FlightRecord) -> PreTacticalFeatures {
    let s = &rec.sobt;
    PreTacticalFeatures {
        carrier_code: rec.carrier_code.clone(),
        dep_airport: rec.dep_airport.clone(),
        arr_airport: rec.arr_airport.clone(),
        aircraft_type: rec.aircraft_type.clone(),
        month: s.month(),
        day: s.day(),
        hour: s.hour(),
        minute: s.minute(),
        day_of_week: s.weekday().num_days_from_monday(),
        sched_duration: minutes_between(&rec.sobt, &rec.sibt),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TurnaroundPair {
    /// Index of the arriving leg in the input slice.
    pub inbound: usize,
    /// Index of the next departing leg of the same tail.
    pub outbound: usize,
    pub minutes: i64,
}

/// Pairs each arrival with the same tail's next departure from that airport.
///
/// Per tail, legs are ordered by actual in-block time (full record order
/// breaks ties so the result does not depend on input order). Consecutive legs
/// pair when the second departs from the first's arrival airport strictly after
/// it blocked in and within [`MAX_TURNAROUND_MINUTES`]. Output is sorted by
/// outbound index.
pub fn match_turnarounds(records: &[FlightRecord]) -> Vec<TurnaroundPair> {
    let mut by_tail: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_tail.entry(r.tail_id.as_str()).or_default().push(i);
    }
    let mut pairs = Vec::new();
    for legs in by_tail.values_mut() {
        legs.sort_by(|&a, &b| {
            let (ra, rb) = (&records[a], &records[b]);
            ra.aibt.cmp(&rb.aibt).then_with(|| ra.cmp(rb)).then(a.cmp(&b))
        });
        for w in legs.windows(2) {
            let (inb, out) = (&records[w[0]], &records[w[1]]);
            if out.dep_airport != inb.arr_airport || out.aobt <= inb.aibt {
                continue;
            }
            let minutes = minutes_between(&inb.aibt, &out.aobt);
            if minutes > 0 && minutes <= MAX_TURNAROUND_MINUTES {
                pairs.push(TurnaroundPair {
                    inbound: w[0],
                    outbound: w[1],
                    minutes,
                });
            }
        }
    }
    pairs.sort_by_key(|p| p.outbound);
    pairs
}

#[derive(Debug, Clone, Default)]
pub struct LabelOutcome {
    pub examples: Vec<LabeledExample>,
    /// Records that were not the outbound leg of any valid turnaround.
    pub unmatched: usize,
}

/// Builds labeled examples for every turnaround-matched outbound flight.
pub fn label_records(records: &[FlightRecord]) -> LabelOutcome {
    let pairs = match_turnarounds(records);
    let examples: Vec<LabeledExample> = pairs
        .iter()
        .map(|p| {
            let rec = &records[p.outbound];
            let (dep_delay, arr_delay) = compute_delays(rec);
            LabeledExample {
                features: extract_features(rec),
                dep_delay,
                arr_delay,
                turnaround: p.minutes,
            }
        })
        .collect();
    LabelOutcome {
        unmatched: records.len() - examples.len(),
        examples,
    }
}

pub fn write_labeled<W: Write>(sink: W, examples: &[LabeledExample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(LABELED_COLUMNS)?;
    for ex in examples {
        let f = &ex.features;
        w.write_record([
            f.carrier_code.clone(),
            f.dep_airport.clone(),
            f.arr_airport.clone(),
            f.aircraft_type.clone(),
            f.month.to_string(),
            f.day.to_string(),
            f.hour.to_string(),
            f.minute.to_string(),
            f.day_of_week.to_string(),
            f.sched_duration.to_string(),
            ex.dep_delay.to_string(),
            ex.arr_delay.to_string(),
            ex.turnaround.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("writing labeled examples", e))?;
    Ok(())
}

fn parse_int<T: std::str::FromStr>(field: &str, column: &str, line: u64) -> Result<T> {
    let t = field.trim();
    t.parse::<T>()
        .or_else(|_| match t.parse::<f64>() {
            Ok(v) if v.is_finite() && v.fract() == 0.0 => format!("{}", v as i64).parse::<T>().map_err(|_| ()),
            _ => Err(()),
        })
        .map_err(|_| Error::InvalidInput(format!("line {line}: column {column}: not an integer: {t:?}")))
}

/// Reads a labeled CSV in [`LABELED_COLUMNS`] order.
pub fn read_labeled<R: Read>(source: R) -> Result<Vec<LabeledExample>> {
    let mut reader = csv::Reader::from_reader(source);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != LABELED_COLUMNS {
        let offending: Vec<String> = LABELED_COLUMNS
            .iter()
            .enumerate()
            .filter(|(i, c)| header.get(*i).map(String::as_str) != Some(**c))
            .map(|(_, c)| c.to_string())
            .collect();
        return Err(Error::SchemaMismatch(offending));
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let g = |i: usize| row.get(i).unwrap_or("");
        out.push(LabeledExample {
            features: PreTacticalFeatures {
                carrier_code: g(0).to_string(),
                dep_airport: g(1).to_string(),
                arr_airport: g(2).to_string(),
                aircraft_type: g(3).to_string(),
                month: parse_int(g(4), "month", line)?,
                day: parse_int(g(5), "day", line)?,
                hour: parse_int(g(6), "hour", line)?,
                minute: parse_int(g(7), "minute", line)?,
                day_of_week: parse_int(g(8), "day_of_week", line)?,
                sched_duration: parse_int(g(9), "sched_duration", line)?,
            },
            dep_delay: parse_int(g(10), "dep_delay", line)?,
            arr_delay: parse_int(g(11), "arr_delay", line)?,
            turnaround: parse_int(g(12), "turnaround", line)?,
        });
    }
    Ok(out)
}
