//! Inner-dimension selection by MSE sweep.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nmf::{squared_distance, fit, NmfConfig};

/// Second differences below this count as a flat curve.
pub const FLATNESS_THRESHOLD: f64 = 1e-3;

/// MSE values are floored at this fraction of the largest MSE before logs
/// are taken, so an exact fit does not produce `-inf`.
pub const RELATIVE_MSE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub iterations: usize,
    pub converged: bool,
    /// Set when the fit for this `k` failed; the metrics are then absent.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSweep {
    pub ks: Vec<usize>,
    /// Mean over all `n·m` entries of `(X − WH)²`.
    pub mse: Vec<Option<f64>>,
    /// `‖X − WH‖_F / ‖X‖_F` (0 for a zero matrix).
    pub relative_error: Vec<Option<f64>>,
    pub suggested_k: Option<usize>,
    pub per_k_fit_meta: Vec<FitMeta>,
}

/// Refits from scratch for each `k` in `k_min..=k_max` with `base`'s other
/// settings, seed and init strategy included.
pub fn sweep(x: &Array2<f64>, k_min: usize, k_max: usize, base: &NmfConfig) -> Result<RankSweep> {
    let (n, m) = x.dim();
    let limit = n.min(m);
    if k_min < 1 || k_min > k_max || k_max >= limit {
        return Err(Error::InvalidConfig(format!(
            "sweep range {k_min}..={k_max} invalid: need 1 <= kmin <= kmax < min(n, m) = {limit}"
        )));
    }
    base.validate_params()?;

    let total = (n * m) as f64;
    let norm2: f64 = x.iter().map(|v| v * v).sum();
    let mut out = RankSweep {
        ks: Vec::new(),
        mse: Vec::new(),
        relative_error: Vec::new(),
        suggested_k: None,
        per_k_fit_meta: Vec::new(),
    };
    for k in k_min..=k_max {
        let config = NmfConfig { k, ..base.clone() };
        out.ks.push(k);
        match fit(x, &config) {
            Ok(f) => {
                let sq = squared_distance(x, &f.reconstruct());
                out.mse.push(Some(sq / total));
                out.relative_error
                    .push(Some(if norm2 > 0.0 { (sq / norm2).sqrt() } else { 0.0 }));
                out.per_k_fit_meta.push(FitMeta {
                    iterations: f.iterations,
                    converged: f.converged,
                    error: None,
                });
            }
            Err(e) => {
                log::warn!("fit at k = {k} failed: {e}");
                out.mse.push(None);
                out.relative_error.push(None);
                out.per_k_fit_meta.push(FitMeta {
                    iterations: 0,
                    converged: false,
                    error: Some(e.to_string()),
                });
            }
        }
    }

    if out.ks.len() >= 3 {
        if let Some(mse) = out.mse.iter().copied().collect::<Option<Vec<f64>>>() {
            out.suggested_k = suggest_elbow(&out.ks, &mse)?;
        }
    }
    Ok(out)
}

/// Interior `k` maximizing `log mse(k−1) − 2 log mse(k) + log mse(k+1)`.
///
/// Returns `None` when the largest second difference is below
/// [`FLATNESS_THRESHOLD`]. Ties go to the smaller `k`.
pub fn suggest_elbow(ks: &[usize], mse: &[f64]) -> Result<Option<usize>> {
    if ks.len() != mse.len() {
        return Err(Error::InvalidInput(format!(
            "{} ranks but {} MSE values",
            ks.len(),
            mse.len()
        )));
    }
    if ks.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "elbow needs at least 3 sweep points, got {}",
            ks.len()
        )));
    }
    if mse.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("MSE values must be finite and non-negative".into()));
    }
    let max = mse.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(None);
    }
    let floor = max * RELATIVE_MSE_FLOOR;
    let logs: Vec<f64> = mse.iter().map(|v| v.max(floor).ln()).collect();

    let mut best: Option<(usize, f64)> = None;
    for i in 1..logs.len() - 1 {
        let d2 = logs[i - 1] - 2.0 * logs[i] + logs[i + 1];
        if best.is_none_or(|(_, b)| d2 > b) {
            best = Some((ks[i], d2));
        }
    }
    Ok(best.filter(|(_, d2)| *d2 >= FLATNESS_THRESHOLD).map(|(k, _)| k))
}
