//! CSV time-series ingestion and export.
//!
//! Formats (header row required, timestamps ISO-8601, UTC assumed when no
//! offset is given):
//! - price: `timestamp,eur_per_kwh`
//! - wind: `timestamp,wind_ms`
//! - demand: `timestamp,household_id,kwh`
//!
//! Input finer than one hour is resampled to hourly means, bucketed by the
//! hour the timestamp falls in.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, DurationRound, NaiveDateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Price,
    Wind,
    Demand,
}

impl SeriesKind {
    fn header(self) -> &'static [&'static str] {
        match self {
            SeriesKind::Price => &["timestamp", "eur_per_kwh"],
            SeriesKind::Wind => &["timestamp", "wind_ms"],
            SeriesKind::Demand => &["timestamp", "household_id", "kwh"],
        }
    }
}

/// One named column of a series file; price and wind files have a single
/// column with no household.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesColumn {
    pub household: Option<String>,
    pub values: Vec<f64>,
}

/// Validated hourly series: strictly increasing timestamps shared by every
/// column, all values finite and nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFile {
    pub kind: SeriesKind,
    pub timestamps: Vec<DateTime<Utc>>,
    pub columns: Vec<SeriesColumn>,
}

impl SeriesFile {
    pub fn single(kind: SeriesKind, timestamps: Vec<DateTime<Utc>>, values: Vec<f64>) -> Self {
        Self {
            kind,
            timestamps,
            columns: vec![SeriesColumn {
                household: None,
                values,
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Values of the first column.
    pub fn values(&self) -> &[f64] {
        self.columns.first().map_or(&[], |c| &c.values)
    }

    pub fn column(&self, household: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|c| c.household.as_deref() == Some(household))
            .map(|c| c.values.as_slice())
    }

    /// Number of whole days, failing unless the length is a multiple of
    /// `per_day`.
    pub fn days(&self, per_day: usize) -> Result<usize, DataError> {
        if per_day == 0 || !self.len().is_multiple_of(per_day) {
            return Err(DataError::Shape(format!(
                "{} points do not split into days of {per_day}",
                self.len()
            )));
        }
        Ok(self.len() / per_day)
    }

    pub fn write<W: Write>(&self, out: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.kind.header())?;
        for col in &self.columns {
            for (ts, v) in self.timestamps.iter().zip(&col.values) {
                let stamp = ts.to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
                let value = v.to_string();
                match &col.household {
                    Some(h) => w.write_record([stamp.as_str(), h.as_str(), value.as_str()])?,
                    None => w.write_record([stamp.as_str(), value.as_str()])?,
                }
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let file = std::fs::File::create(path).map_err(|e| DataError::io(path, e))?;
        self.write(std::io::BufWriter::new(file))
    }
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|n| n.and_utc())
}

pub fn load_series(path: &Path, kind: SeriesKind) -> Result<SeriesFile, DataError> {
    let file = std::fs::File::open(path).map_err(|e| DataError::io(path, e))?;
    read_series(file, kind)
}

/// Parses and validates a series from any reader; see [`load_series`].
pub fn read_series<R: Read>(input: R, kind: SeriesKind) -> Result<SeriesFile, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != kind.header() {
        return Err(DataError::Parse {
            line: 1,
            message: format!("expected header {:?}, found {:?}", kind.header(), header),
        });
    }

    // Raw points per column, in first-appearance order.
    let mut order: Vec<Option<String>> = Vec::new();
    let mut raw: BTreeMap<Option<String>, Vec<(DateTime<Utc>, f64, u64)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let ts = parse_timestamp(field(0)).ok_or_else(|| DataError::Parse {
            line,
            message: format!("bad timestamp {:?}", field(0)),
        })?;
        let (household, value_field) = match kind {
            SeriesKind::Demand => (Some(field(1).to_owned()), field(2)),
            _ => (None, field(1)),
        };
        if household.as_deref() == Some("") {
            return Err(DataError::Parse {
                line,
                message: "empty household_id".into(),
            });
        }
        let value: f64 = value_field.parse().map_err(|_| DataError::Parse {
            line,
            message: format!("bad value {value_field:?}"),
        })?;
        if !value.is_finite() {
            return Err(DataError::Parse {
                line,
                message: format!("non-finite value {value_field:?}"),
            });
        }
        if value < 0.0 {
            return Err(DataError::Negative { line, value });
        }
        let points = raw.entry(household.clone()).or_insert_with(|| {
            order.push(household.clone());
            Vec::new()
        });
        if let Some(&(prev, _, _)) = points.last() {
            if ts <= prev {
                return Err(DataError::NonMonotone { line });
            }
        }
        points.push((ts, value, line));
    }
    if order.is_empty() {
        return Err(DataError::Shape("series has no data rows".into()));
    }

    let mut timestamps: Option<Vec<DateTime<Utc>>> = None;
    let mut columns = Vec::new();
    for key in order {
        let (ts, values) = hourly_means(&raw[&key]);
        match &timestamps {
            None => timestamps = Some(ts),
            Some(first) if *first != ts => {
                return Err(DataError::Shape(format!(
                    "household {} has a different time axis",
                    key.unwrap_or_default()
                )));
            }
            Some(_) => {}
        }
        columns.push(SeriesColumn {
            household: key,
            values,
        });
    }
    Ok(SeriesFile {
        kind,
        timestamps: timestamps.unwrap_or_default(),
        columns,
    })
}

fn hourly_means(points: &[(DateTime<Utc>, f64, u64)]) -> (Vec<DateTime<Utc>>, Vec<f64>) {
    let hour = TimeDelta::hours(1);
    let mut ts: Vec<DateTime<Utc>> = Vec::new();
    let mut sums: Vec<(f64, usize)> = Vec::new();
    for &(t, v, _) in points {
        let bucket = t.duration_trunc(hour).unwrap_or(t);
        if ts.last() == Some(&bucket) {
            let last = sums.last_mut().expect("bucket exists");
            last.0 += v;
            last.1 += 1;
        } else {
            ts.push(bucket);
            sums.push((v, 1));
        }
    }
    let values = sums
        .into_iter()
        .map(|(s, n)| if n == 1 { s } else { s / n as f64 })
        .collect();
    (ts, values)
}
