use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};

use super::{ClockTime, FlightRecord};
use crate::{Error, Result};

/// Required input columns, in the canonical output order.
pub const COLUMNS: [&str; 17] = [
    "YEAR",
    "QUARTER",
    "MONTH",
    "DAY_OF_MONTH",
    "DAY_OF_WEEK",
    "CARRIER",
    "FLIGHT_NUM",
    "ORIGIN_AIRPORT_ID",
    "DEST_AIRPORT_ID",
    "DEST_WAC",
    "CRS_DEP_TIME",
    "CRS_ARR_TIME",
    "DISTANCE",
    "DEP_DELAY",
    "ARR_DELAY",
    "ARR_DEL15",
    "CANCELLED",
];

/// One CSV row as read, before typing. Extra columns (weather and the like)
/// are carried along untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub cells: Vec<(String, String)>,
    pub line: u64,
}

impl RawRow {
    pub fn get(&self, column: &str) -> Option<&str> {
        self.cells
            .iter()
            .find(|(name, _)| name == column)
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    pub line: u64,
    pub reason: String,
}

impl fmt::Display for Reject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line={} reason={}", self.line, self.reason)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOutcome {
    pub records: Vec<FlightRecord>,
    pub rejects: Vec<Reject>,
}

/// Parses an on-time performance CSV stream. Malformed rows are reported in
/// `rejects` with their line number; they are never dropped silently.
pub fn parse_flights<R: Read>(input: R) -> Result<ParseOutcome> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);

    let header: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let missing: Vec<String> = COLUMNS
        .iter()
        .filter(|c| !header.iter().any(|h| h == *c))
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingColumns(missing));
    }
    let mut seen = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        if let Some(prev) = seen.insert(h.as_str(), i) {
            return Err(Error::Csv(format!(
                "duplicate column {h} at positions {} and {}",
                prev + 1,
                i + 1
            )));
        }
    }

    let mut outcome = ParseOutcome::default();
    let mut row = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                if let csv::ErrorKind::Io(_) = e.kind() {
                    return Err(csv_error(e));
                }
                let line = e.position().map_or(0, |p| p.line());
                outcome.rejects.push(Reject {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        }
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != header.len() {
            outcome.rejects.push(Reject {
                line,
                reason: format!("expected {} cells, found {}", header.len(), row.len()),
            });
            continue;
        }
        let raw = RawRow {
            cells: header
                .iter()
                .cloned()
                .zip(row.iter().map(str::to_string))
                .collect(),
            line,
        };
        match record_from_raw(&raw) {
            Ok(record) => outcome.records.push(record),
            Err(reason) => outcome.rejects.push(Reject { line, reason }),
        }
    }
    Ok(outcome)
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Stream(io),
            other => Error::Csv(format!("{other:?}")),
        }
    } else {
        Error::Csv(e.to_string())
    }
}

fn cell<'a>(raw: &'a RawRow, column: &str) -> &'a str {
    raw.get(column).map(str::trim).unwrap_or("")
}

fn required<'a>(raw: &'a RawRow, column: &str) -> std::result::Result<&'a str, String> {
    let v = cell(raw, column);
    if v.is_empty() {
        Err(format!("{column} is missing"))
    } else {
        Ok(v)
    }
}

fn integer<T: std::str::FromStr>(raw: &RawRow, column: &str) -> std::result::Result<T, String> {
    let v = required(raw, column)?;
    v.parse()
        .map_err(|_| format!("{column}={v:?} is not an integer"))
}

fn real(raw: &RawRow, column: &str) -> std::result::Result<Option<f64>, String> {
    let v = cell(raw, column);
    if v.is_empty() {
        return Ok(None);
    }
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(Some(x)),
        _ => Err(format!("{column}={v:?} is not a number")),
    }
}

fn flag(raw: &RawRow, column: &str) -> std::result::Result<Option<bool>, String> {
    match real(raw, column)? {
        None => Ok(None),
        Some(0.0) => Ok(Some(false)),
        Some(1.0) => Ok(Some(true)),
        Some(_) => Err(format!("{column}={:?} is not 0 or 1", cell(raw, column))),
    }
}

fn clock(raw: &RawRow, column: &str) -> std::result::Result<ClockTime, String> {
    let v = required(raw, column)?;
    let hhmm: u16 = v
        .parse()
        .map_err(|_| format!("{column}={v:?} is not an HHMM time"))?;
    ClockTime::new(hhmm).map_err(|_| format!("{column}={v:?} is not a valid HHMM time"))
}

fn record_from_raw(raw: &RawRow) -> std::result::Result<FlightRecord, String> {
    let record = FlightRecord {
        year: integer(raw, "YEAR")?,
        quarter: integer(raw, "QUARTER")?,
        month: integer(raw, "MONTH")?,
        day_of_month: integer(raw, "DAY_OF_MONTH")?,
        day_of_week: integer(raw, "DAY_OF_WEEK")?,
        flight_num: required(raw, "FLIGHT_NUM")?.to_string(),
        carrier: required(raw, "CARRIER")?.to_string(),
        origin_airport_id: integer(raw, "ORIGIN_AIRPORT_ID")?,
        dest_airport_id: integer(raw, "DEST_AIRPORT_ID")?,
        dest_wac: integer(raw, "DEST_WAC")?,
        crs_dep_time: clock(raw, "CRS_DEP_TIME")?,
        crs_arr_time: clock(raw, "CRS_ARR_TIME")?,
        distance: real(raw, "DISTANCE")?.ok_or("DISTANCE is missing")?,
        dep_delay: real(raw, "DEP_DELAY")?,
        arr_delay: real(raw, "ARR_DELAY")?,
        arr_del15: flag(raw, "ARR_DEL15")?,
        cancelled: flag(raw, "CANCELLED")?.ok_or("CANCELLED is missing")?,
    };
    record.validate()?;
    Ok(record)
}

fn opt_real(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_flag(v: Option<bool>) -> String {
    v.map(|b| u8::from(b).to_string()).unwrap_or_default()
}

/// Writes records in the canonical column order. Reals use the shortest
/// representation that parses back to the same value.
pub fn write_flights<W: Write>(out: W, records: &[FlightRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Csv(e.to_string());
    writer.write_record(COLUMNS).map_err(err)?;
    for r in records {
        writer
            .write_record([
                r.year.to_string(),
                r.quarter.to_string(),
                r.month.to_string(),
                r.day_of_month.to_string(),
                r.day_of_week.to_string(),
                r.carrier.clone(),
                r.flight_num.clone(),
                r.origin_airport_id.to_string(),
                r.dest_airport_id.to_string(),
                r.dest_wac.to_string(),
                r.crs_dep_time.to_string(),
                r.crs_arr_time.to_string(),
                r.distance.to_string(),
                opt_real(r.dep_delay),
                opt_real(r.arr_delay),
                opt_flag(r.arr_del15),
                u8::from(r.cancelled).to_string(),
            ])
            .map_err(err)?;
    }
    writer.flush()?;
    Ok(())
}
