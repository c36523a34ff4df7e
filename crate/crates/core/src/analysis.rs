//! Post-processing of a factorization: device-minute activations, component
//! summaries and per-day residuals.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nmf::Factorization;

pub const MINUTES_PER_DAY: f64 = 1440.0;

/// Default fraction of a component's peak that counts as "active".
pub const DEFAULT_ACTIVE_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedActivations {
    /// `k × m`, device-minutes per day.
    pub hw: Array2<f64>,
    /// `‖W_j‖₁` for each component.
    pub component_l1: Array1<f64>,
    pub step_minutes: f64,
}

/// `Hw[j, i] = H[j, i] · ‖W_j‖₁ · step_minutes`.
pub fn weight_activations(fact: &Factorization, step_minutes: f64) -> Result<WeightedActivations> {
    if !(step_minutes > 0.0 && step_minutes.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "step_minutes must be positive, got {step_minutes}"
        )));
    }
    let component_l1 = fact.w.map_axis(Axis(0), |col| col.iter().map(|v| v.abs()).sum::<f64>());
    let mut hw = fact.h.clone();
    for (mut row, l1) in hw.rows_mut().into_iter().zip(component_l1.iter()) {
        row.mapv_inplace(|h| h * l1 * step_minutes);
    }
    Ok(WeightedActivations {
        hw,
        component_l1,
        step_minutes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub factorization: Factorization,
    /// Components whose `W` column was all zeros and was left untouched.
    pub zero_columns: Vec<usize>,
}

/// Rescales each `W` column to unit L1 norm and its `H` row by the old norm.
///
/// `WH` is unchanged up to rounding, and so is [`weight_activations`].
pub fn normalize_components(fact: &Factorization) -> Normalized {
    let mut out = fact.clone();
    let mut zero_columns = Vec::new();
    for j in 0..out.k() {
        let norm: f64 = out.w.column(j).iter().map(|v| v.abs()).sum();
        if norm == 0.0 {
            zero_columns.push(j);
            continue;
        }
        out.w.column_mut(j).mapv_inplace(|v| v / norm);
        out.h.row_mut(j).mapv_inplace(|v| v * norm);
    }
    Normalized {
        factorization: out,
        zero_columns,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub component_index: usize,
    pub peak_slot: usize,
    /// Slots where `W_j` is at least `active_fraction` of its peak.
    pub active_slots: Vec<usize>,
    pub l1_norm: f64,
    pub mean_device_minutes: f64,
    pub implied_constant_devices: f64,
}

/// One summary per component.
///
/// `implied_constant_devices` is the number of devices that, present all
/// day, would account for the component's mean device-minutes.
pub fn component_summaries(
    fact: &Factorization,
    weighted: &WeightedActivations,
    active_fraction: f64,
    minutes_per_day: f64,
) -> Vec<ComponentSummary> {
    (0..fact.k())
        .map(|j| {
            let col = fact.w.column(j);
            let (peak_slot, peak) = col
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
            let active_slots = if peak > 0.0 {
                col.iter()
                    .enumerate()
                    .filter(|(_, v)| **v >= active_fraction * peak)
                    .map(|(i, _)| i)
                    .collect()
            } else {
                Vec::new()
            };
            let mean_device_minutes = weighted.hw.row(j).mean().unwrap_or(0.0);
            ComponentSummary {
                component_index: j,
                peak_slot,
                active_slots,
                l1_norm: weighted.component_l1[j],
                mean_device_minutes,
                implied_constant_devices: mean_device_minutes / minutes_per_day,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayResidual {
    pub day_index: usize,
    pub residual_l2: f64,
    /// `‖x_i − (WH)_i‖ / ‖x_i‖`; `None` for an all-zero day.
    pub relative_error: Option<f64>,
    /// 1-based position when days are sorted by descending residual.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub global_mse: f64,
    /// Chronological, one entry per day.
    pub days: Vec<DayResidual>,
}

impl ReconstructionReport {
    /// Day indices from largest to smallest residual.
    pub fn ranked(&self) -> Vec<usize> {
        let mut order: Vec<&DayResidual> = self.days.iter().collect();
        order.sort_by_key(|d| d.rank);
        order.into_iter().map(|d| d.day_index).collect()
    }
}

pub fn reconstruction_report(x: &Array2<f64>, fact: &Factorization) -> Result<ReconstructionReport> {
    let wh = fact.reconstruct();
    if wh.dim() != x.dim() {
        return Err(Error::ShapeMismatch {
            expected: x.dim(),
            found: wh.dim(),
        });
    }
    let (n, m) = x.dim();
    let mut total = 0.0;
    let mut days = Vec::with_capacity(m);
    for (i, (xc, yc)) in x.columns().into_iter().zip(wh.columns()).enumerate() {
        let sq: f64 = xc.iter().zip(yc.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        total += sq;
        let norm = xc.iter().map(|v| v * v).sum::<f64>().sqrt();
        let residual = sq.sqrt();
        days.push(DayResidual {
            day_index: i,
            residual_l2: residual,
            relative_error: (norm > 0.0).then(|| residual / norm),
            rank: 0,
        });
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| days[b].residual_l2.total_cmp(&days[a].residual_l2));
    for (pos, &i) in order.iter().enumerate() {
        days[i].rank = pos + 1;
    }
    Ok(ReconstructionReport {
        global_mse: total / (n * m) as f64,
        days,
    })
}
