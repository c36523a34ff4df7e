//! CSV ingestion of timestamped usercounts.
//!
//! Input is a header row naming a timestamp column and a count column; any
//! other columns are ignored. Timestamps are RFC 3339 with an explicit
//! offset unless [`IngestOptions::assume_utc`] is set, in which case naive
//! `YYYY-MM-DD[T ]HH:MM:SS` values are read as UTC.
//!
//! Rows that fail validation are rejected one by one and recorded in the
//! [`IngestReport`]; only an unusable header or an empty result is fatal.

use std::io::Read;

use chrono::{DateTime, NaiveDateTime, SubsecRound, Utc};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub timestamp: DateTime<Utc>,
    pub count: f64,
}

/// Timestamped counts for one site, ascending in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSeries {
    pub site_id: String,
    pub samples: Vec<RawSample>,
    /// Zone that defines calendar-day boundaries downstream.
    pub timezone: Tz,
}

impl RawSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// True when timestamps are strictly increasing.
    pub fn is_strictly_increasing(&self) -> bool {
        self.samples
            .windows(2)
            .all(|w| w[0].timestamp < w[1].timestamp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub site_id: String,
    pub timestamp_column: String,
    pub count_column: String,
    pub timezone: Tz,
    /// Read offset-less timestamps as UTC instead of rejecting them.
    pub assume_utc: bool,
    /// Drop zero-count rows so they become gaps instead of true zeros.
    pub zeros_as_gaps: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            site_id: "site".to_string(),
            timestamp_column: "timestamp".to_string(),
            count_column: "count".to_string(),
            timezone: Tz::UTC,
            assume_utc: false,
            zeros_as_gaps: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    UnparseableTimestamp,
    UnparseableCount,
    NegativeCount,
    NonFiniteCount,
    ZeroAsGap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRow {
    /// 1-based line number in the input, header is line 1.
    pub line: u64,
    pub reason: RejectReason,
    pub raw: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_accepted: usize,
    pub rejected: Vec<RejectedRow>,
}

impl IngestReport {
    pub fn rejected_count(&self) -> usize {
        self.rejected.len()
    }
}

/// How duplicate timestamps collapse to a single sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DedupePolicy {
    #[default]
    Mean,
    Max,
    First,
}

impl std::str::FromStr for DedupePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "max" => Ok(Self::Max),
            "first" => Ok(Self::First),
            other => Err(Error::InvalidConfig(format!(
                "unknown dedupe policy {other:?}, expected mean|max|first"
            ))),
        }
    }
}

fn parse_timestamp(raw: &str, assume_utc: bool) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(raw) {
        return Some(ts.with_timezone(&Utc).trunc_subsecs(0));
    }
    if assume_utc {
        for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
            if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
                return Some(naive.and_utc().trunc_subsecs(0));
            }
        }
    }
    None
}

/// Parses a CSV stream into a time-sorted series.
///
/// Duplicate timestamps survive this step (in file order); see [`dedupe`].
pub fn parse_csv<R: Read>(reader: R, options: &IngestOptions) -> Result<(RawSeries, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| Error::MalformedHeader(e.to_string()))?
        .clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::MalformedHeader(format!(
                "missing column {name:?} (found: {})",
                headers.iter().collect::<Vec<_>>().join(",")
            ))
        })
    };
    let ts_col = find(&options.timestamp_column)?;
    let count_col = find(&options.count_column)?;

    let mut report = IngestReport::default();
    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record?;
        report.rows_read += 1;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let reject = |reason: RejectReason| {
            log::warn!("rejecting line {line}: {reason:?}");
            RejectedRow {
                line,
                reason,
                raw: record.iter().collect::<Vec<_>>().join(","),
            }
        };

        let Some(timestamp) = record
            .get(ts_col)
            .and_then(|s| parse_timestamp(s, options.assume_utc))
        else {
            report.rejected.push(reject(RejectReason::UnparseableTimestamp));
            continue;
        };
        let count = match record.get(count_col).map(|s| s.parse::<f64>()) {
            Some(Ok(c)) => c,
            _ => {
                report.rejected.push(reject(RejectReason::UnparseableCount));
                continue;
            }
        };
        if !count.is_finite() {
            report.rejected.push(reject(RejectReason::NonFiniteCount));
            continue;
        }
        if count < 0.0 {
            report.rejected.push(reject(RejectReason::NegativeCount));
            continue;
        }
        if count == 0.0 && options.zeros_as_gaps {
            report.rejected.push(reject(RejectReason::ZeroAsGap));
            continue;
        }
        samples.push(RawSample { timestamp, count });
    }

    if samples.is_empty() {
        return Err(Error::EmptySeries {
            rejected: report.rejected.len(),
        });
    }
    // Stable, so duplicates keep file order for DedupePolicy::First.
    samples.sort_by_key(|s| s.timestamp);
    report.rows_accepted = samples.len();

    Ok((
        RawSeries {
            site_id: options.site_id.clone(),
            samples,
            timezone: options.timezone,
        },
        report,
    ))
}

/// Collapses runs of equal timestamps in a sorted series.
pub fn dedupe(series: RawSeries, policy: DedupePolicy) -> RawSeries {
    let mut out: Vec<RawSample> = Vec::with_capacity(series.samples.len());
    let mut run_len = 0usize;
    let mut run_sum = 0.0;
    for sample in series.samples {
        match out.last_mut() {
            Some(last) if last.timestamp == sample.timestamp => {
                run_len += 1;
                run_sum += sample.count;
                match policy {
                    DedupePolicy::Mean => last.count = run_sum / run_len as f64,
                    DedupePolicy::Max => last.count = last.count.max(sample.count),
                    DedupePolicy::First => {}
                }
            }
            _ => {
                run_len = 1;
                run_sum = sample.count;
                out.push(sample);
            }
        }
    }
    RawSeries {
        samples: out,
        ..series
    }
}
