//! Tide-gauge CSV ingestion.

use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};

use super::config::DataFormat;
use crate::error::{Error, Result};
use crate::sealevel::{Observation, TideGaugeSeries};

/// Missing-value marker in level columns.
pub const SENTINEL: f64 = -99999.0;

const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

fn year_start(year: i32) -> Option<NaiveDateTime> {
    NaiveDate::from_ymd_opt(year, 1, 1)?.and_hms_opt(0, 0, 0)
}

/// Parse a tide-gauge CSV. A header row is optional. Sentinel rows are
/// dropped and counted in [`TideGaugeSeries::dropped_sentinels`].
pub fn ingest_tide_gauge(path: &Path, format: DataFormat) -> Result<TideGaugeSeries> {
    let file = std::fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    read_tide_gauge(file, &path.display().to_string(), format)
}

pub fn read_tide_gauge(reader: impl std::io::Read, source: &str, format: DataFormat) -> Result<TideGaugeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(reader);
    let mut observations = Vec::new();
    let mut dropped = 0usize;
    let malformed = |line: u64, message: String| Error::MalformedRow {
        path: source.to_string(),
        line,
        message,
    };
    for (row_index, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            malformed(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(row_index as u64 + 1);
        if record.len() != 2 {
            return Err(malformed(line, format!("expected 2 fields, found {}", record.len())));
        }
        let (t, v) = (&record[0], &record[1]);
        let time = match format {
            DataFormat::AnnualMean => t.parse::<i32>().ok().and_then(year_start),
            DataFormat::HighFrequency => NaiveDateTime::parse_from_str(t, TIME_FORMAT).ok(),
        };
        let level = v.parse::<f64>().ok();
        let (time, level) = match (time, level) {
            (Some(time), Some(level)) => (time, level),
            // tolerate a header line
            _ if row_index == 0 && level.is_none() => continue,
            (None, _) => return Err(malformed(line, format!("cannot parse time `{t}`"))),
            (_, None) => return Err(malformed(line, format!("cannot parse level `{v}`"))),
        };
        if level == SENTINEL {
            dropped += 1;
            continue;
        }
        if !level.is_finite() {
            return Err(malformed(line, format!("non-finite level `{v}`")));
        }
        if let Some(prev) = observations.last().map(|o: &Observation| o.time) {
            if time <= prev {
                return Err(malformed(line, format!("timestamp {time} does not follow {prev}")));
            }
        }
        observations.push(Observation { time, level_mm: level });
    }
    if dropped > 0 {
        tracing::info!(dropped, source, "dropped missing-value rows");
    }
    let mut series = TideGaugeSeries::new(observations)?;
    series.dropped_sentinels = dropped;
    Ok(series)
}
