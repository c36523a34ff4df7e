//! β-divergences and the regularized objective.

use ndarray::{Array2, Zip};

use super::NmfConfig;
use crate::error::{Error, Result};

/// Scalar β-divergence `d_β(z | y)`.
///
/// * β = 0: `z/y − ln(z/y) − 1` (Itakura–Saito)
/// * β = 1: `z ln(z/y) − z + y` (Kullback–Leibler)
/// * otherwise: `(z^β + (β−1) y^β − β z y^(β−1)) / (β(β−1))`
///
/// `y` must be positive. For β ∈ {0, 1}, `z = 0` is a domain error unless
/// `limit_at_zero` is set, in which case the KL term `z ln(z/y)` is taken as
/// its limit 0. Itakura–Saito has no finite limit at `z = 0`.
pub fn beta_divergence(z: f64, y: f64, beta: f64, limit_at_zero: bool) -> Result<f64> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::Domain(format!("y must be positive and finite, got {y}")));
    }
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("z must be non-negative and finite, got {z}")));
    }
    if z == y {
        return Ok(0.0);
    }
    let d = if beta == 0.0 {
        if z == 0.0 {
            return Err(Error::Domain("Itakura-Saito divergence undefined at z = 0".into()));
        }
        let r = z / y;
        r - r.ln() - 1.0
    } else if beta == 1.0 {
        if z == 0.0 {
            if !limit_at_zero {
                return Err(Error::Domain(
                    "Kullback-Leibler divergence at z = 0 needs limit_at_zero".into(),
                ));
            }
            y
        } else {
            z * (z / y).ln() - z + y
        }
    } else if beta == 2.0 {
        0.5 * (z - y) * (z - y)
    } else {
        (z.powf(beta) + (beta - 1.0) * y.powf(beta) - beta * z * y.powf(beta - 1.0))
            / (beta * (beta - 1.0))
    };
    // Rounding can push values near z = y a hair below zero.
    Ok(d.max(0.0))
}

fn check_shape(x: &Array2<f64>, y: &Array2<f64>) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::ShapeMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    Ok(())
}

/// Element-wise sum of β-divergences between `x` and `y`.
///
/// For β = 2 this is `½‖X − Y‖²_F` and `y` may contain zeros.
pub fn matrix_divergence(x: &Array2<f64>, y: &Array2<f64>, beta: f64, limit_at_zero: bool) -> Result<f64> {
    check_shape(x, y)?;
    if beta == 2.0 {
        return Ok(0.5 * squared_distance(x, y));
    }
    let mut total = 0.0;
    for (&z, &yv) in x.iter().zip(y.iter()) {
        total += beta_divergence(z, yv, beta, limit_at_zero)?;
    }
    Ok(total)
}

/// `‖X − Y‖²_F`, summed in row-major order.
pub fn squared_distance(x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let mut total = 0.0;
    Zip::from(x).and(y).for_each(|&a, &b| total += (a - b) * (a - b));
    total
}

fn l1(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

fn fro2(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// The regularized objective of `(W, H)` against `X`.
///
/// For β = 2:
/// `½‖X − WH‖²_F + ρα(‖W‖₁ + ‖H‖₁) + ½α(1−ρ)(‖W‖²_F + ‖H‖²_F)`.
/// For β ∈ {0, 1} (α must be 0) the β-divergence `D(X | WH)`, with `WH`
/// floored at [`EPSILON`](super::EPSILON) so the log terms stay finite;
/// entries where both `X` and `WH` are zero contribute nothing.
pub fn objective(x: &Array2<f64>, w: &Array2<f64>, h: &Array2<f64>, config: &NmfConfig) -> Result<f64> {
    if w.ncols() != h.nrows() || w.nrows() != x.nrows() || h.ncols() != x.ncols() {
        return Err(Error::ShapeMismatch {
            expected: x.dim(),
            found: (w.nrows(), h.ncols()),
        });
    }
    if config.alpha > 0.0 && config.beta != 2.0 {
        return Err(Error::InvalidConfig(
            "regularization (alpha > 0) is only defined for beta = 2".into(),
        ));
    }
    let wh = w.dot(h);
    if config.beta == 2.0 {
        let fit = 0.5 * squared_distance(x, &wh);
        if config.alpha == 0.0 {
            return Ok(fit);
        }
        let (a, r) = (config.alpha, config.rho);
        Ok(fit + r * a * (l1(w) + l1(h)) + 0.5 * a * (1.0 - r) * (fro2(w) + fro2(h)))
    } else {
        let mut total = 0.0;
        for (&z, &y) in x.iter().zip(wh.iter()) {
            if z == 0.0 && y == 0.0 {
                continue;
            }
            total += beta_divergence(z, y.max(super::EPSILON), config.beta, true)?;
        }
        Ok(total)
    }
}
