//! Trip and weather ingestion.
//!
//! Both readers are lenient about individual rows and strict about file
//! structure: a missing or unknown header column is a [`Error::Format`],
//! while a bad row is tallied in the [`ValidationReport`] and skipped
//! (trips) or kept with the offending field marked missing (weather).

pub mod synthetic;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use synthetic::{generate_synthetic, Hotspot, SyntheticData, SyntheticManifest, SyntheticSpec};

pub const TRIP_HEADER: [&str; 7] = [
    "pickup_at",
    "dropoff_at",
    "passengers",
    "origin_lat",
    "origin_lon",
    "dest_lat",
    "dest_lon",
];

pub const WEATHER_HEADER: [&str; 7] = [
    "observed_at",
    "temperature",
    "condition",
    "visibility",
    "wind_speed",
    "humidity",
    "fog",
];

/// Sentinel the weather provider uses for an unrecorded visibility.
pub const VISIBILITY_SENTINEL: f64 = -9999.0;

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";

pub fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    NaiveDateTime::parse_from_str(raw, TIMESTAMP_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S"))
        .ok()
}

pub fn format_timestamp(ts: &NaiveDateTime) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub pickup_at: NaiveDateTime,
    pub dropoff_at: NaiveDateTime,
    pub passengers: u32,
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub dest_lat: f64,
    pub dest_lon: f64,
}

impl TripRecord {
    /// First violated invariant, if any, as a report reason.
    pub fn violation(&self) -> Option<&'static str> {
        if self.dropoff_at <= self.pickup_at {
            return Some("non-positive duration");
        }
        if self.passengers < 1 {
            return Some("zero passengers");
        }
        let lat_ok = |v: f64| (-90.0..=90.0).contains(&v);
        let lon_ok = |v: f64| (-180.0..=180.0).contains(&v);
        if !(lat_ok(self.origin_lat)
            && lat_ok(self.dest_lat)
            && lon_ok(self.origin_lon)
            && lon_ok(self.dest_lon))
        {
            return Some("coordinate out of range");
        }
        None
    }

    pub fn is_valid(&self) -> bool {
        self.violation().is_none()
    }
}

/// Weather condition levels, in their canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    Normal,
    Snow,
    Rain,
    Thunderstorm,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::Normal,
        Condition::Snow,
        Condition::Rain,
        Condition::Thunderstorm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Normal => "Normal",
            Condition::Snow => "Snow",
            Condition::Rain => "Rain",
            Condition::Thunderstorm => "Thunderstorm",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| Error::argument(format!("unknown weather condition {s:?}")))
    }
}

/// One hourly observation. `None` marks a missing or invalid measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherRecord {
    pub observed_at: NaiveDateTime,
    pub temperature: Option<f64>,
    pub condition: Option<Condition>,
    pub visibility: Option<f64>,
    pub wind_speed: Option<f64>,
    pub humidity: Option<f64>,
    pub fog: Option<bool>,
}

impl WeatherRecord {
    pub fn has_missing(&self) -> bool {
        self.temperature.is_none()
            || self.condition.is_none()
            || self.visibility.is_none()
            || self.wind_speed.is_none()
            || self.humidity.is_none()
            || self.fog.is_none()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub total: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// Rejection tally per rule.
    pub reasons: BTreeMap<String, usize>,
    /// Fields retained but flagged missing, per column (weather only).
    #[serde(default)]
    pub missing: BTreeMap<String, usize>,
}

impl ValidationReport {
    fn accept(&mut self) {
        self.total += 1;
        self.accepted += 1;
    }

    fn reject(&mut self, reason: &str) {
        self.total += 1;
        self.rejected += 1;
        *self.reasons.entry(reason.to_string()).or_default() += 1;
    }

    fn flag_missing(&mut self, column: &str) {
        *self.missing.entry(column.to_string()).or_default() += 1;
    }
}

/// Map each expected column name to its position in the file header.
fn column_positions<const N: usize>(
    headers: &csv::StringRecord,
    expected: &[&str; N],
) -> Result<[usize; N]> {
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::format("missing header row"));
    }
    let mut positions = [usize::MAX; N];
    for (pos, name) in headers.iter().enumerate() {
        let name = name.trim();
        match expected.iter().position(|e| *e == name) {
            Some(i) if positions[i] == usize::MAX => positions[i] = pos,
            Some(_) => return Err(Error::format(format!("duplicate column {name:?}"))),
            None => return Err(Error::format(format!("unknown column {name:?}"))),
        }
    }
    if let Some(i) = positions.iter().position(|p| *p == usize::MAX) {
        return Err(Error::format(format!("missing column {:?}", expected[i])));
    }
    Ok(positions)
}

fn open_reader<R: Read>(source: R) -> Result<(csv::Reader<R>, csv::StringRecord)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::format("empty file"));
    }
    Ok((reader, headers))
}

/// Finite real, or `None` for blanks, garbage, NaN and infinities.
fn parse_real(raw: &str) -> Option<f64> {
    raw.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn parse_trips<R: Read>(source: R) -> Result<(Vec<TripRecord>, ValidationReport)> {
    let (mut reader, headers) = open_reader(source)?;
    let pos = column_positions(&headers, &TRIP_HEADER)?;
    let mut report = ValidationReport::default();
    let mut trips = Vec::new();

    for row in reader.records() {
        let row = match row {
            Ok(row) => row,
            Err(_) => {
                report.reject("malformed row");
                continue;
            }
        };
        if row.len() != TRIP_HEADER.len() {
            report.reject("malformed row");
            continue;
        }
        let field = |i: usize| row.get(pos[i]).unwrap_or("");
        let parsed = (|| {
            Some(TripRecord {
                pickup_at: parse_timestamp(field(0))?,
                dropoff_at: parse_timestamp(field(1))?,
                passengers: field(2).trim().parse::<u32>().ok()?,
                origin_lat: parse_real(field(3))?,
                origin_lon: parse_real(field(4))?,
                dest_lat: parse_real(field(5))?,
                dest_lon: parse_real(field(6))?,
            })
        })();
        match parsed {
            None => report.reject("missing value"),
            Some(trip) => match trip.violation() {
                Some(reason) => report.reject(reason),
                None => {
                    report.accept();
                    trips.push(trip);
                }
            },
        }
    }
    Ok((trips, report))
}

pub fn parse_weather<R: Read>(source: R) -> Result<(Vec<WeatherRecord>, ValidationReport)> {
    let (mut reader, headers) = open_reader(source)?;
    let pos = column_positions(&headers, &WEATHER_HEADER)?;
    let mut report = ValidationReport::default();
    let mut records = Vec::new();
    let mut seen_hours = HashSet::new();

    for row in reader.records() {
        let row = match row {
            Ok(row) if row.len() == WEATHER_HEADER.len() => row,
            _ => {
                report.reject("malformed row");
                continue;
            }
        };
        let field = |i: usize| row.get(pos[i]).unwrap_or("");
        let Some(observed_at) = parse_timestamp(field(0)) else {
            report.reject("invalid timestamp");
            continue;
        };
        if observed_at.minute() != 0 || observed_at.second() != 0 {
            report.reject("unaligned hour");
            continue;
        }
        if !seen_hours.insert(observed_at) {
            report.reject("duplicate hour");
            continue;
        }

        let temperature = parse_real(field(1));
        let condition = field(2).parse::<Condition>().ok();
        let visibility = parse_real(field(3)).filter(|v| *v >= 0.0);
        let wind_speed = parse_real(field(4)).filter(|v| *v >= 0.0);
        let humidity = parse_real(field(5)).filter(|v| (0.0..=100.0).contains(v));
        let fog = match field(6).trim() {
            "1" => Some(true),
            "0" => Some(false),
            _ => None,
        };
        let record = WeatherRecord {
            observed_at,
            temperature,
            condition,
            visibility,
            wind_speed,
            humidity,
            fog,
        };
        for (name, missing) in [
            ("temperature", record.temperature.is_none()),
            ("condition", record.condition.is_none()),
            ("visibility", record.visibility.is_none()),
            ("wind_speed", record.wind_speed.is_none()),
            ("humidity", record.humidity.is_none()),
            ("fog", record.fog.is_none()),
        ] {
            if missing {
                report.flag_missing(name);
            }
        }
        report.accept();
        records.push(record);
    }
    Ok((records, report))
}

pub fn write_trips<W: Write>(sink: W, trips: &[TripRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(TRIP_HEADER)?;
    for t in trips {
        writer.write_record([
            format_timestamp(&t.pickup_at),
            format_timestamp(&t.dropoff_at),
            t.passengers.to_string(),
            t.origin_lat.to_string(),
            t.origin_lon.to_string(),
            t.dest_lat.to_string(),
            t.dest_lon.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn opt_to_string<T: ToString>(value: Option<T>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Missing visibility is written as the provider sentinel, other missing
/// fields as blanks.
pub fn write_weather<W: Write>(sink: W, records: &[WeatherRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(WEATHER_HEADER)?;
    for r in records {
        writer.write_record([
            format_timestamp(&r.observed_at),
            opt_to_string(r.temperature),
            opt_to_string(r.condition),
            r.visibility.unwrap_or(VISIBILITY_SENTINEL).to_string(),
            opt_to_string(r.wind_speed),
            opt_to_string(r.humidity),
            opt_to_string(r.fog.map(u8::from)),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
