//! HALS-style block coordinate descent for the β = 2 objective.
//!
//! With `W` fixed, row `t` of `H` enters the objective only through
//!
//! ```text
//! ½ Σ_i ‖r_i − W_t h_ti‖² + ρα Σ_i h_ti + ½α(1−ρ) Σ_i h_ti²
//! ```
//!
//! where `r_i` is column `i` of the residual without component `t`. Each
//! `h_ti` is an independent one-dimensional quadratic, minimized over
//! `h ≥ 0` by
//!
//! ```text
//! h_ti ← max(0, h_ti − g_ti / ((WᵀW)_tt + α(1−ρ)))
//! g_ti = (WᵀWH)_ti − (WᵀX)_ti + ρα + α(1−ρ) h_ti
//! ```
//!
//! Rows are updated in order `t = 0..k` using the already-updated rows, then
//! columns of `W` the same way with `HHᵀ` and `XHᵀ`. Every block step is an
//! exact minimization, so the objective never increases across a sweep.

use ndarray::{Array2, ArrayView2, ArrayViewMut2};

use super::{check_factors, iterate, Factorization, NmfConfig};
use crate::error::{Error, Result};

/// Updates the rows of `factor` (`k × cols`) given `gram = AᵀA` and
/// `cross = AᵀX` for the fixed factor `A`.
fn update_rows(mut factor: ArrayViewMut2<f64>, gram: &Array2<f64>, cross: ArrayView2<f64>, l1: f64, l2: f64) {
    let (k, cols) = factor.dim();
    for t in 0..k {
        let hess = gram[[t, t]] + l2;
        for i in 0..cols {
            let mut grad = l1 - cross[[t, i]] + l2 * factor[[t, i]];
            for s in 0..k {
                grad += gram[[t, s]] * factor[[s, i]];
            }
            factor[[t, i]] = if hess > 0.0 {
                (factor[[t, i]] - grad / hess).max(0.0)
            } else if grad > 0.0 {
                // Flat in this coordinate apart from a positive linear term.
                0.0
            } else {
                factor[[t, i]]
            };
        }
    }
}

fn sweep(x: &Array2<f64>, w: &mut Array2<f64>, h: &mut Array2<f64>, l1: f64, l2: f64) {
    let wtw = w.t().dot(&*w);
    let wtx = w.t().dot(x);
    update_rows(h.view_mut(), &wtw, wtx.view(), l1, l2);

    let hht = h.dot(&h.t());
    let hxt = h.dot(&x.t());
    update_rows(w.view_mut().reversed_axes(), &hht, hxt.view(), l1, l2);
}

/// Coordinate descent on the regularized Frobenius objective.
pub fn solve_cd(x: &Array2<f64>, w0: Array2<f64>, h0: Array2<f64>, config: &NmfConfig) -> Result<Factorization> {
    if config.beta != 2.0 {
        return Err(Error::InvalidConfig(format!(
            "coordinate descent supports beta = 2 only, got {}",
            config.beta
        )));
    }
    config.validate_params()?;
    check_factors(x, &w0, &h0)?;
    let (l1, l2) = config.penalties();
    iterate(x, w0, h0, config, |x, w, h| sweep(x, w, h, l1, l2))
}
