//! Multiplicative updates.
//!
//! # Derivation (β = 2, with the elastic-net penalty)
//!
//! With `W` fixed the objective in `H` is
//!
//! ```text
//! f(H) = ½‖X − WH‖²_F + ρα Σ H + ½α(1−ρ) ‖H‖²_F        (H ≥ 0)
//! ```
//!
//! and its gradient splits into a non-negative "positive" and "negative" part:
//!
//! ```text
//! ∇f = [WᵀWH + ρα + α(1−ρ)H] − [WᵀX] = ∇⁺ − ∇⁻
//! ```
//!
//! A gradient step with the per-entry step size `η = H / ∇⁺` gives
//! `H − η(∇⁺ − ∇⁻) = H ⊙ ∇⁻ ⊘ ∇⁺`, the multiplicative rule
//!
//! ```text
//! H ← H ⊙ (WᵀX) ⊘ (WᵀWH + ρα + α(1−ρ)H)
//! W ← W ⊙ (XHᵀ) ⊘ (WHHᵀ + ρα + α(1−ρ)W)
//! ```
//!
//! It keeps entries non-negative and does not increase `f`: the usual
//! Lee–Seung auxiliary function `G(H', H)` with diagonal curvature
//! `(WᵀWH)_{ij}/H_{ij}` majorizes the quadratic part, the L1 and ridge terms
//! are separable and convex, and the rule above is the exact minimizer of the
//! resulting separable majorizer. Denominators are floored at
//! [`EPSILON`](super::EPSILON); with a positive denominator the floor is inactive
//! and the descent argument holds unchanged.
//!
//! # β ∈ {0, 1}
//!
//! For `D_β(X | WH)` the same split of `∇_H D_β = Wᵀ[(WH)^{β−1}] − Wᵀ[(WH)^{β−2} ⊙ X]`
//! gives
//!
//! ```text
//! H ← H ⊙ ( Wᵀ[(WH)^{β−2} ⊙ X] ⊘ Wᵀ[(WH)^{β−1}] )^γ
//! ```
//!
//! with `γ = 1/(2−β)` for β < 1 and `γ = 1` for β ∈ [1, 2]; the exponent is
//! what keeps the Itakura–Saito case monotone. `WH` is floored at `EPSILON`
//! before the powers are taken.

use ndarray::{Array2, Zip};

use super::{check_factors, iterate, Factorization, NmfConfig, EPSILON};
use crate::error::{Error, Result};

fn apply_ratio(target: &mut Array2<f64>, num: &Array2<f64>, den: &Array2<f64>, gamma: f64) {
    Zip::from(target).and(num).and(den).for_each(|t, &n, &d| {
        let ratio = n / d.max(EPSILON);
        *t *= if gamma == 1.0 { ratio } else { ratio.powf(gamma) };
    });
}

fn frobenius_sweep(x: &Array2<f64>, w: &mut Array2<f64>, h: &mut Array2<f64>, l1: f64, l2: f64) {
    let num = w.t().dot(x);
    let mut den = w.t().dot(w).dot(h);
    Zip::from(&mut den).and(&*h).for_each(|d, &hv| *d += l1 + l2 * hv);
    apply_ratio(h, &num, &den, 1.0);

    let num = x.dot(&h.t());
    let mut den = w.dot(&h.dot(&h.t()));
    Zip::from(&mut den).and(&*w).for_each(|d, &wv| *d += l1 + l2 * wv);
    apply_ratio(w, &num, &den, 1.0);
}

fn beta_sweep(x: &Array2<f64>, w: &mut Array2<f64>, h: &mut Array2<f64>, beta: f64) {
    let gamma = if beta < 1.0 { 1.0 / (2.0 - beta) } else { 1.0 };
    let weights = |wh: &Array2<f64>| {
        let wh = wh.mapv(|v| v.max(EPSILON));
        let num = Zip::from(&wh).and(x).map_collect(|&y, &z| y.powf(beta - 2.0) * z);
        let den = wh.mapv(|y| y.powf(beta - 1.0));
        (num, den)
    };

    let (a, b) = weights(&w.dot(&*h));
    let num = w.t().dot(&a);
    let den = w.t().dot(&b);
    apply_ratio(h, &num, &den, gamma);

    let (a, b) = weights(&w.dot(&*h));
    let num = a.dot(&h.t());
    let den = b.dot(&h.t());
    apply_ratio(w, &num, &den, gamma);
}

/// Alternating multiplicative updates, `H` first then `W` in each iteration.
///
/// Zero entries of `W0`/`H0` stay zero.
pub fn solve_mu(x: &Array2<f64>, w0: Array2<f64>, h0: Array2<f64>, config: &NmfConfig) -> Result<Factorization> {
    config.validate_params()?;
    check_factors(x, &w0, &h0)?;
    if config.beta != 2.0 && config.alpha != 0.0 {
        return Err(Error::InvalidConfig("alpha > 0 requires beta = 2".into()));
    }
    let (l1, l2) = config.penalties();
    let beta = config.beta;
    iterate(x, w0, h0, config, |x, w, h| {
        if beta == 2.0 {
            frobenius_sweep(x, w, h, l1, l2);
        } else {
            beta_sweep(x, w, h, beta);
        }
    })
}
