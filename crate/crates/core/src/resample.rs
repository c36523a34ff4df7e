//! Fixed-step linear interpolation and the days-as-columns embedding.
//!
//! Grid instants for calendar day `d` (in the series' zone) are
//! `local_midnight(d) + i * step` for `i < 86400 / step`. Every column
//! therefore has the same length, including on 23- and 25-hour DST days,
//! where the grid runs an hour short of or past the next local midnight.

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use chrono_tz::Tz;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::RawSeries;

pub const SECONDS_PER_DAY: u32 = 86_400;
pub const DEFAULT_STEP_SECS: u32 = 600;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GapPolicy {
    /// Raw gaps longer than this mark the slots they produce; `None` is unlimited.
    pub max_gap_secs: Option<i64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DayPolicy {
    /// Minimum fraction of unmasked slots a day needs to be kept.
    pub min_coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GriddedSeries {
    pub site_id: String,
    pub timezone: Tz,
    pub step_secs: u32,
    /// Calendar days covered, consecutive and in order.
    pub days: Vec<NaiveDate>,
    /// `days.len() * slots_per_day` values, day-major.
    pub values: Vec<f64>,
    pub gap_mask: Vec<bool>,
}

impl GriddedSeries {
    pub fn slots_per_day(&self) -> usize {
        (SECONDS_PER_DAY / self.step_secs) as usize
    }

    pub fn grid_start(&self) -> DateTime<Utc> {
        day_start(self.days[0], &self.timezone)
    }

    pub fn instant(&self, day: usize, slot: usize) -> DateTime<Utc> {
        day_start(self.days[day], &self.timezone)
            + Duration::seconds(slot as i64 * self.step_secs as i64)
    }
}

/// The `n × m` data matrix: one column per retained day, `n` slots per day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    pub x: Array2<f64>,
    pub day_labels: Vec<NaiveDate>,
}

impl DataMatrix {
    pub fn new(x: Array2<f64>, day_labels: Vec<NaiveDate>) -> Result<Self> {
        if x.ncols() != day_labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} columns but {} day labels",
                x.ncols(),
                day_labels.len()
            )));
        }
        if x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput(
                "data matrix entries must be finite and non-negative".into(),
            ));
        }
        if day_labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("day labels must be chronological".into()));
        }
        Ok(Self { x, day_labels })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn m(&self) -> usize {
        self.x.ncols()
    }

    /// Column-major flattening: day after day.
    pub fn flatten(&self) -> Vec<f64> {
        self.x.t().iter().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedDay {
    pub date: NaiveDate,
    pub coverage: f64,
}

/// First instant of `date` in `tz`. Zones whose midnight falls in a DST gap
/// start the day at the first valid local time after it.
pub fn day_start(date: NaiveDate, tz: &Tz) -> DateTime<Utc> {
    let midnight = date.and_hms_opt(0, 0, 0).expect("midnight is valid");
    let mut probe = midnight;
    for _ in 0..=24 * 4 {
        if let Some(t) = tz.from_local_datetime(&probe).earliest() {
            return t.with_timezone(&Utc);
        }
        probe += Duration::minutes(15);
    }
    unreachable!("no valid local time on {date} in {tz}")
}

fn check_step(step_secs: u32) -> Result<()> {
    if step_secs == 0 || SECONDS_PER_DAY % step_secs != 0 {
        return Err(Error::InvalidConfig(format!(
            "step of {step_secs} s does not divide the 86400 s day"
        )));
    }
    Ok(())
}

/// Linear interpolation of `series` onto the per-day grid.
///
/// Before the first and after the last sample the nearest count is held
/// constant. The distance to the nearest sample counts as the gap there.
pub fn interpolate(series: &RawSeries, step_secs: u32, policy: &GapPolicy) -> Result<GriddedSeries> {
    check_step(step_secs)?;
    let samples = &series.samples;
    if samples.is_empty() {
        return Err(Error::InvalidInput("cannot interpolate an empty series".into()));
    }
    if !series.is_strictly_increasing() {
        return Err(Error::InvalidInput(
            "series must be sorted and deduplicated before interpolation".into(),
        ));
    }

    let tz = series.timezone;
    let first_day = samples[0].timestamp.with_timezone(&tz).date_naive();
    let last_day = samples[samples.len() - 1].timestamp.with_timezone(&tz).date_naive();
    let days: Vec<NaiveDate> = first_day.iter_days().take_while(|d| *d <= last_day).collect();
    let slots = (SECONDS_PER_DAY / step_secs) as usize;

    let mut values = Vec::with_capacity(days.len() * slots);
    let mut gap_mask = Vec::with_capacity(days.len() * slots);
    for day in &days {
        let start = day_start(*day, &tz);
        for slot in 0..slots {
            let t = start + Duration::seconds(slot as i64 * step_secs as i64);
            let after = samples.partition_point(|s| s.timestamp <= t);
            let (value, gap_secs) = if after == 0 {
                (samples[0].count, (samples[0].timestamp - t).num_seconds())
            } else if after == samples.len() {
                let last = samples[after - 1];
                (last.count, (t - last.timestamp).num_seconds())
            } else {
                let left = samples[after - 1];
                let right = samples[after];
                if left.timestamp == t {
                    (left.count, 0)
                } else {
                    let span = (right.timestamp - left.timestamp).num_seconds();
                    let value = if left.count == right.count {
                        left.count
                    } else {
                        let frac = (t - left.timestamp).num_seconds() as f64 / span as f64;
                        // Convex combination: non-negative for non-negative endpoints.
                        (1.0 - frac) * left.count + frac * right.count
                    };
                    (value, span)
                }
            };
            values.push(value);
            gap_mask.push(policy.max_gap_secs.is_some_and(|max| gap_secs > max));
        }
    }

    Ok(GriddedSeries {
        site_id: series.site_id.clone(),
        timezone: tz,
        step_secs,
        days,
        values,
        gap_mask,
    })
}

/// Lays each calendar day out as one column, dropping days whose unmasked
/// fraction is below `policy.min_coverage`.
pub fn embed_days(grid: &GriddedSeries, policy: &DayPolicy) -> Result<(DataMatrix, Vec<DroppedDay>)> {
    if !(0.0..=1.0).contains(&policy.min_coverage) {
        return Err(Error::InvalidConfig(format!(
            "min_coverage {} outside [0, 1]",
            policy.min_coverage
        )));
    }
    check_step(grid.step_secs)?;
    let n = grid.slots_per_day();
    if grid.values.len() != n * grid.days.len() || grid.gap_mask.len() != grid.values.len() {
        return Err(Error::InvalidInput(format!(
            "gridded series has {} values for {} days of {n} slots",
            grid.values.len(),
            grid.days.len()
        )));
    }

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (d, date) in grid.days.iter().enumerate() {
        let mask = &grid.gap_mask[d * n..(d + 1) * n];
        let coverage = mask.iter().filter(|m| !**m).count() as f64 / n as f64;
        if coverage < policy.min_coverage {
            dropped.push(DroppedDay {
                date: *date,
                coverage,
            });
        } else {
            kept.push(d);
        }
    }
    if kept.is_empty() {
        return Err(Error::NoDays {
            dropped: dropped.len(),
        });
    }

    let x = Array2::from_shape_fn((n, kept.len()), |(slot, col)| grid.values[kept[col] * n + slot]);
    let day_labels = kept.iter().map(|&d| grid.days[d]).collect();
    Ok((DataMatrix { x, day_labels }, dropped))
}
