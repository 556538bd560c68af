//! Tick-data ingestion: timestamped observations to daily curves.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::sample::FunctionalSample;

/// Observations with strictly increasing timestamps (UTC, nanosecond precision).
#[derive(Clone, Debug, PartialEq)]
pub struct TickSeries {
    timestamps: Vec<NaiveDateTime>,
    values: Vec<f64>,
}

impl TickSeries {
    pub fn new(timestamps: Vec<NaiveDateTime>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} timestamps but {} values",
                timestamps.len(),
                values.len()
            )));
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Ingest(format!(
                "timestamps not strictly increasing at row {}: {} then {}",
                i + 2,
                timestamps[i],
                timestamps[i + 1]
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Ingest(format!("non-finite value at row {}", i + 1)));
        }
        Ok(Self { timestamps, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Median spacing in seconds, `None` with fewer than two ticks.
    pub fn frequency(&self) -> Option<f64> {
        let mut gaps: Vec<f64> = self
            .timestamps
            .windows(2)
            .map(|w| (w[1] - w[0]).num_nanoseconds().unwrap_or(i64::MAX) as f64 * 1e-9)
            .collect();
        if gaps.is_empty() {
            return None;
        }
        gaps.sort_by(f64::total_cmp);
        Some(gaps[gaps.len() / 2])
    }

    /// Reads `timestamp,value` rows. A header row and `#` comments are skipped.
    /// Timestamps are Unix seconds, RFC 3339, or `YYYY-MM-DD HH:MM:SS[.f]`.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut timestamps = Vec::new();
        let mut values = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() < 2 {
                return Err(Error::Ingest(format!("row {}: expected timestamp,value", row + 1)));
            }
            let (t, v) = (&record[0], &record[1]);
            match (parse_timestamp(t), v.parse::<f64>()) {
                (Some(t), Ok(v)) => {
                    timestamps.push(t);
                    values.push(v);
                }
                _ if row == 0 => continue,
                _ => return Err(Error::Ingest(format!("row {}: cannot parse {t:?},{v:?}", row + 1))),
            }
        }
        Self::new(timestamps, values)
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Writes `timestamp,value` rows with RFC 3339 timestamps.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp", "value"])?;
        for (t, v) in self.timestamps.iter().zip(&self.values) {
            w.write_record([t.and_utc().to_rfc3339(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    if let Ok(secs) = s.parse::<f64>() {
        if !secs.is_finite() {
            return None;
        }
        let whole = secs.floor();
        let nanos = ((secs - whole) * 1e9).round() as u32;
        return DateTime::from_timestamp(whole as i64, nanos.min(999_999_999)).map(|d| d.naive_utc());
    }
    if let Ok(d) = DateTime::parse_from_rfc3339(s) {
        return Some(d.naive_utc());
    }
    ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

#[derive(Clone, Debug, Serialize)]
pub struct DroppedDay {
    pub date: NaiveDate,
    pub points: usize,
}

#[derive(Clone, Debug)]
pub struct IngestReport {
    /// One centered curve per complete day, on `[0, 1]` with an endpoint atom of 1.
    pub curves: FunctionalSample,
    pub days: Vec<NaiveDate>,
    pub dropped: Vec<DroppedDay>,
    /// Global mean of the retained ticks, subtracted from every curve.
    pub mean: f64,
}

/// Groups ticks by calendar day (UTC); days with exactly `day_length` ticks become curves.
pub fn ingest_ticks(series: &TickSeries, day_length: usize) -> Result<IngestReport> {
    if day_length < 2 {
        return Err(Error::Usage(format!("day_length must be at least 2, got {day_length}")));
    }
    let mut by_day: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for (t, v) in series.timestamps.iter().zip(&series.values) {
        by_day.entry(t.date()).or_default().push(*v);
    }
    let mut days = Vec::new();
    let mut dropped = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    for (date, vals) in by_day {
        if vals.len() == day_length {
            days.push(date);
            rows.extend(vals);
        } else {
            dropped.push(DroppedDay {
                date,
                points: vals.len(),
            });
        }
    }
    if days.is_empty() {
        return Err(Error::Ingest(format!(
            "no complete day of {day_length} points among {} day(s)",
            dropped.len()
        )));
    }
    let mean = rows.iter().sum::<f64>() / rows.len() as f64;
    rows.iter_mut().for_each(|v| *v -= mean);
    let grid = Arc::new(Grid::uniform(day_length, 1.0, 1.0)?);
    let values = DMatrix::from_row_slice(days.len(), day_length, &rows);
    Ok(IngestReport {
        curves: FunctionalSample::new(values, grid)?,
        days,
        dropped,
        mean,
    })
}

/// Reads a tick CSV from disk and ingests it.
pub fn ingest_ticks_file(path: &Path, day_length: usize) -> Result<IngestReport> {
    ingest_ticks(&TickSeries::read_path(path)?, day_length)
}
