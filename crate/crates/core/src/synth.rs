//! Synthetic usercount series with planted daily patterns.
//!
//! Each archetype is a unit-L1 daily profile over 144 ten-minute slots, a
//! weekday schedule and a magnitude. The clean count on day `d` at
//! time-of-day `s` is
//!
//! ```text
//! Σ_j magnitude_j · schedule_j[weekday(d)] · decay_j(d) · shape_j(s)
//! ```
//!
//! with `shape_j(s)` linear between slot knots. Gaussian noise is added per
//! sample and the result clipped at zero. Corrupt days replace the whole
//! profile.
//!
//! Sampling instants follow one jittered time-of-day schedule (gaps of 3 to
//! 12 minutes, plus a closing sample at 23:50) that repeats every day. Since
//! every day is sampled at the same offsets, re-gridding by linear
//! interpolation maps each archetype to one fixed grid profile, and a
//! noiseless, uncorrupted scenario keeps exact rank after resampling.

use chrono::{Datelike, Duration, NaiveDate, TimeZone, Utc};
use chrono_tz::Tz;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{RawSample, RawSeries};

pub const SLOTS: usize = 144;
pub const SLOT_SECS: i64 = 600;
pub const MIN_SPACING_SECS: i64 = 180;
pub const MAX_SPACING_SECS: i64 = 720;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archetype {
    pub name: String,
    /// Unit-L1 profile over the 144 slots of a day.
    pub shape: Vec<f64>,
    /// Activation multipliers, Monday first.
    pub weekly_schedule: [f64; 7],
    /// Device-slots per day at multiplier 1.
    pub magnitude: f64,
    /// Baseline archetypes are exempt from decay.
    #[serde(default)]
    pub baseline: bool,
}

impl Archetype {
    /// Normalizes `profile` to unit L1 and sets the magnitude so the profile
    /// peaks at `peak_devices`.
    pub fn from_profile(name: &str, profile: &[f64], peak_devices: f64, weekly_schedule: [f64; 7]) -> Self {
        let total: f64 = profile.iter().sum();
        let shape: Vec<f64> = profile.iter().map(|v| v / total).collect();
        let peak = shape.iter().copied().fold(0.0, f64::max);
        Self {
            name: name.to_string(),
            shape,
            weekly_schedule,
            magnitude: peak_devices / peak,
            baseline: false,
        }
    }

    /// A flat archetype of `devices` devices, present every day.
    pub fn constant(name: &str, devices: f64) -> Self {
        Self {
            name: name.to_string(),
            shape: vec![1.0 / SLOTS as f64; SLOTS],
            weekly_schedule: [1.0; 7],
            magnitude: devices * SLOTS as f64,
            baseline: true,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(format!("archetype {:?}: {msg}", self.name)));
        if self.shape.len() != SLOTS {
            return bad(format!("shape has {} entries, expected {SLOTS}", self.shape.len()));
        }
        if self.shape.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("shape must be finite and non-negative".into());
        }
        let l1: f64 = self.shape.iter().sum();
        if (l1 - 1.0).abs() > 1e-9 {
            return bad(format!("shape L1 norm is {l1}, expected 1"));
        }
        if self.weekly_schedule.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("weekly schedule must be finite and non-negative".into());
        }
        if !(self.magnitude >= 0.0 && self.magnitude.is_finite()) {
            return bad("magnitude must be finite and non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptInterval {
    pub start_day: usize,
    pub n_days: usize,
    /// Replacement counts for the 144 slots of each corrupt day.
    pub profile: Vec<f64>,
    /// Extra per-sample noise on corrupt days, on top of the scenario's.
    #[serde(default)]
    pub noise_sd: f64,
}

impl CorruptInterval {
    pub fn contains(&self, day: usize) -> bool {
        (self.start_day..self.start_day + self.n_days).contains(&day)
    }
}

/// Exponential attenuation `exp(−rate · (d − start_day))` of non-baseline
/// archetypes from `start_day` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decay {
    pub start_day: usize,
    pub rate: f64,
}

impl Decay {
    pub fn factor(&self, day: usize) -> f64 {
        if day < self.start_day {
            1.0
        } else {
            (-self.rate * (day - self.start_day) as f64).exp()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "default_site")]
    pub site_id: String,
    pub start_date: NaiveDate,
    pub n_days: usize,
    pub noise_sd: f64,
    pub archetypes: Vec<Archetype>,
    #[serde(default)]
    pub corrupt_interval: Option<CorruptInterval>,
    #[serde(default)]
    pub decay: Option<Decay>,
}

fn default_site() -> String {
    "synthetic".to_string()
}

fn bump(center_hours: f64, width_hours: f64) -> Vec<f64> {
    (0..SLOTS)
        .map(|i| {
            let z = (i as f64 / 6.0 - center_hours) / width_hours;
            if z.abs() > 3.0 {
                0.0
            } else {
                (-0.5 * z * z).exp()
            }
        })
        .collect()
}

impl Scenario {
    /// Four archetypes (AM, PM, Late, Baseline) over 77 days from a Sunday,
    /// with a 3-day corrupt block at days 42–44 and decay from day 47.
    /// Noise is 2% of the clean peak.
    ///
    /// The corrupt days read as a stuck level of 60 with heavy sample noise,
    /// different on each day, so no shared daily pattern can absorb them.
    pub fn norlin_like() -> Self {
        Self::norlin_like_with_noise(0.02)
    }

    /// [`Scenario::norlin_like`] with noise at `fraction` of the clean peak.
    pub fn norlin_like_with_noise(fraction: f64) -> Self {
        let weekdays = [1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0];
        let afternoons = [1.0, 1.0, 1.0, 1.0, 0.8, 0.4, 0.5];
        let evenings = [1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        let mut scenario = Self {
            site_id: default_site(),
            start_date: NaiveDate::from_ymd_opt(2020, 1, 19).expect("valid date"),
            n_days: 77,
            noise_sd: 0.0,
            archetypes: vec![
                Archetype::from_profile("AM", &bump(10.5, 1.5), 150.0, weekdays),
                Archetype::from_profile("PM", &bump(15.0, 2.0), 120.0, afternoons),
                Archetype::from_profile("Late", &bump(21.0, 1.5), 70.0, evenings),
                Archetype::constant("Baseline", 20.0),
            ],
            corrupt_interval: Some(CorruptInterval {
                start_day: 42,
                n_days: 3,
                profile: vec![60.0; SLOTS],
                noise_sd: 20.0,
            }),
            decay: Some(Decay {
                start_day: 47,
                rate: 0.08,
            }),
        };
        scenario.noise_sd = fraction * scenario.clean_peak();
        scenario
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_days == 0 {
            return Err(Error::InvalidConfig("scenario needs at least one day".into()));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "noise_sd must be finite and non-negative, got {}",
                self.noise_sd
            )));
        }
        for a in &self.archetypes {
            a.validate()?;
        }
        if let Some(c) = &self.corrupt_interval {
            if c.profile.len() != SLOTS || c.profile.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::InvalidConfig(format!(
                    "corrupt profile needs {SLOTS} finite non-negative values"
                )));
            }
            if !(c.noise_sd >= 0.0 && c.noise_sd.is_finite()) {
                return Err(Error::InvalidConfig("corrupt noise_sd must be non-negative".into()));
            }
            if c.start_day + c.n_days > self.n_days {
                return Err(Error::InvalidConfig("corrupt interval runs past the last day".into()));
            }
        }
        if let Some(d) = &self.decay {
            if !(d.rate >= 0.0 && d.rate.is_finite()) {
                return Err(Error::InvalidConfig("decay rate must be non-negative".into()));
            }
        }
        Ok(())
    }

    /// Activation of archetype `j` on day `day`.
    pub fn activation(&self, j: usize, day: usize) -> f64 {
        let a = &self.archetypes[j];
        let weekday = (self.start_date + Duration::days(day as i64))
            .weekday()
            .num_days_from_monday() as usize;
        let decay = match (&self.decay, a.baseline) {
            (Some(d), false) => d.factor(day),
            _ => 1.0,
        };
        a.magnitude * a.weekly_schedule[weekday] * decay
    }

    /// Noiseless count at `slot_pos` (fractional slot index) on `day`.
    pub fn clean_value(&self, day: usize, slot_pos: f64) -> f64 {
        if let Some(c) = self.corrupt_interval.as_ref().filter(|c| c.contains(day)) {
            return lerp(&c.profile, slot_pos);
        }
        (0..self.archetypes.len())
            .map(|j| self.activation(j, day) * lerp(&self.archetypes[j].shape, slot_pos))
            .sum()
    }

    /// Largest noiseless count over all days and slot knots.
    pub fn clean_peak(&self) -> f64 {
        (0..self.n_days)
            .flat_map(|d| (0..SLOTS).map(move |s| (d, s)))
            .map(|(d, s)| self.clean_value(d, s as f64))
            .fold(0.0, f64::max)
    }
}

fn lerp(profile: &[f64], pos: f64) -> f64 {
    let lo = (pos.floor() as usize).min(profile.len() - 1);
    let hi = (lo + 1).min(profile.len() - 1);
    let frac = pos - lo as f64;
    if frac == 0.0 || lo == hi {
        profile[lo]
    } else {
        (1.0 - frac) * profile[lo] + frac * profile[hi]
    }
}

/// Time-of-day offsets in seconds: starts at 0, gaps uniform in
/// `[MIN_SPACING_SECS, MAX_SPACING_SECS]`, ends exactly at the last slot.
pub fn sampling_offsets<R: Rng>(rng: &mut R) -> Vec<i64> {
    let last = (SLOTS as i64 - 1) * SLOT_SECS;
    let mut offsets = vec![0];
    let mut t = 0;
    loop {
        t += rng.random_range(MIN_SPACING_SECS..=MAX_SPACING_SECS);
        if t >= last {
            break;
        }
        offsets.push(t);
    }
    offsets.push(last);
    offsets
}

/// Generates a UTC series for `scenario`, deterministic in `seed`.
pub fn generate(scenario: &Scenario, seed: u64) -> Result<RawSeries> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets = sampling_offsets(&mut rng);
    let noise = Normal::new(0.0, scenario.noise_sd)
        .map_err(|e| Error::InvalidConfig(format!("noise: {e}")))?;
    let corrupt_sd = scenario.corrupt_interval.as_ref().map_or(0.0, |c| c.noise_sd);
    let corrupt_noise = Normal::new(0.0, corrupt_sd)
        .map_err(|e| Error::InvalidConfig(format!("corrupt noise: {e}")))?;

    let start = Utc.from_utc_datetime(&scenario.start_date.and_hms_opt(0, 0, 0).expect("midnight"));
    let mut samples = Vec::with_capacity(scenario.n_days * offsets.len());
    for day in 0..scenario.n_days {
        let day_start = start + Duration::days(day as i64);
        let corrupt = corrupt_sd > 0.0
            && scenario.corrupt_interval.as_ref().is_some_and(|c| c.contains(day));
        for &offset in &offsets {
            let mut value = scenario.clean_value(day, offset as f64 / SLOT_SECS as f64);
            if scenario.noise_sd > 0.0 {
                value += noise.sample(&mut rng);
            }
            if corrupt {
                value += corrupt_noise.sample(&mut rng);
            }
            let value = value.max(0.0);
            samples.push(RawSample {
                timestamp: day_start + Duration::seconds(offset),
                count: value,
            });
        }
    }
    Ok(RawSeries {
        site_id: scenario.site_id.clone(),
        samples,
        timezone: Tz::UTC,
    })
}
