//! Candle CSV files: `timestamp,open,high,low,close`, UTC ISO-8601
//! timestamps, prices with up to five decimals.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Utc};
use surefire_core::market::{GapPolicy, FOUR_HOURS_SECS};
use surefire_core::{Candle, CandleSeries, Pips};

use crate::error::AppError;

pub const HEADER: [&str; 5] = ["timestamp", "open", "high", "low", "close"];

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line 1: expected header `{}`, found `{found}`", HEADER.join(","))]
    Header { found: String },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("no data rows")]
    Empty,
}

fn row_error(line: u64, message: impl Into<String>) -> DataError {
    DataError::Row { line, message: message.into() }
}

/// Accepts RFC 3339 or a bare `YYYY-MM-DDTHH:MM:SS` (read as UTC).
pub fn parse_timestamp(s: &str) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|n| n.and_utc().timestamp())
}

pub fn format_timestamp(ts: i64) -> String {
    match DateTime::<Utc>::from_timestamp(ts, 0) {
        Some(dt) => dt.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        None => ts.to_string(),
    }
}

pub fn load_csv<R: Read>(source: R, bar_period_secs: i64, gaps: GapPolicy) -> Result<CandleSeries, DataError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let header = reader.headers().map_err(csv_error)?.clone();
    let found: Vec<&str> = header.iter().map(|h| h.trim_start_matches('\u{feff}')).collect();
    if found != HEADER {
        return Err(DataError::Header { found: found.join(",") });
    }
    let mut candles = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != HEADER.len() {
            return Err(row_error(line, format!("expected 5 fields, found {}", record.len())));
        }
        let timestamp =
            parse_timestamp(&record[0]).ok_or_else(|| row_error(line, format!("bad timestamp `{}`", &record[0])))?;
        let mut prices = [Pips(0); 4];
        for (i, p) in prices.iter_mut().enumerate() {
            let field = &record[i + 1];
            *p = Pips::parse_decimal(field)
                .ok_or_else(|| row_error(line, format!("bad {} price `{field}`", HEADER[i + 1])))?;
        }
        let [open, high, low, close] = prices;
        let candle = Candle::new(timestamp, open, high, low, close).map_err(|e| match e {
            surefire_core::Error::InvalidCandle { reason, .. } => row_error(line, reason),
            other => row_error(line, other.to_string()),
        })?;
        candles.push(candle);
        lines.push(line);
    }
    if candles.is_empty() {
        return Err(DataError::Empty);
    }
    CandleSeries::new(candles, bar_period_secs, gaps).map_err(|e| {
        use surefire_core::Error as E;
        let index = match e {
            E::InvalidCandle { index, .. } | E::NonMonotonic { index } | E::Gap { index, .. } => index,
            _ => 0,
        };
        let message = match e {
            E::NonMonotonic { .. } => "timestamp not strictly after the previous row".to_string(),
            E::Gap { gap_secs, period_secs, .. } => {
                format!("gap of {gap_secs}s after the previous row (bar period {period_secs}s)")
            }
            other => other.to_string(),
        };
        row_error(lines.get(index).copied().unwrap_or(0), message)
    })
}

fn csv_error(e: csv::Error) -> DataError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => DataError::Io(io),
        csv::ErrorKind::UnequalLengths { len, .. } => row_error(line, format!("expected 5 fields, found {len}")),
        csv::ErrorKind::Utf8 { .. } => row_error(line, "invalid UTF-8"),
        other => row_error(line, format!("{other:?}")),
    }
}

pub fn load_csv_path(path: &Path, gaps: GapPolicy) -> Result<CandleSeries, AppError> {
    let wrap = |source| AppError::Data { path: path.to_path_buf(), source };
    let file = File::open(path).map_err(|e| wrap(DataError::Io(e)))?;
    load_csv(file, FOUR_HOURS_SECS, gaps).map_err(wrap)
}

pub fn write_csv<W: Write>(series: &CandleSeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", HEADER.join(","))?;
    for c in series.candles() {
        writeln!(out, "{},{},{},{},{}", format_timestamp(c.timestamp), c.open, c.high, c.low, c.close)?;
    }
    out.flush()
}

/// Gaps between consecutive bars wider than the bar period, as
/// `(index of the later bar, gap in seconds)`.
pub fn gaps(series: &CandleSeries) -> Vec<(usize, i64)> {
    series
        .candles()
        .windows(2)
        .enumerate()
        .filter_map(|(i, w)| {
            let delta = w[1].timestamp - w[0].timestamp;
            (delta != series.bar_period_secs()).then_some((i + 1, delta))
        })
        .collect()
}
