//! Regularized non-negative matrix factorization `X ≈ W H`.
//!
//! `W` is `n × k` (daily patterns in its columns), `H` is `k × m` (per-day
//! weights in its rows). Two solvers are provided: multiplicative updates
//! for β ∈ {0, 1, 2} and HALS-style coordinate descent for β = 2.

mod cd;
mod divergence;
mod init;
mod mu;
mod svd;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cd::solve_cd;
pub use divergence::{beta_divergence, matrix_divergence, objective, squared_distance};
pub use init::{init_nndsvd, init_random, initialize, NndsvdVariant};
pub use mu::solve_mu;
pub use svd::{truncated_svd, SvdTriplets};

/// Floor for multiplicative-update denominators and for `WH` inside log terms.
pub const EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Multiplicative,
    #[default]
    CoordinateDescent,
}

impl std::str::FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multiplicative" | "mu" => Ok(Self::Multiplicative),
            "coordinate_descent" | "cd" => Ok(Self::CoordinateDescent),
            other => Err(Error::InvalidConfig(format!(
                "unknown solver {other:?}, expected multiplicative|coordinate_descent"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    Random,
    Nndsvd,
    Nndsvda,
    #[default]
    Nndsvdar,
}

impl std::str::FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "nndsvd" => Ok(Self::Nndsvd),
            "nndsvda" => Ok(Self::Nndsvda),
            "nndsvdar" => Ok(Self::Nndsvdar),
            other => Err(Error::InvalidConfig(format!(
                "unknown init {other:?}, expected random|nndsvd|nndsvda|nndsvdar"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmfConfig {
    /// Inner dimension.
    pub k: usize,
    /// 0 (Itakura–Saito), 1 (Kullback–Leibler) or 2 (Frobenius).
    pub beta: f64,
    /// Regularization intensity; only allowed with β = 2.
    pub alpha: f64,
    /// L1 share of the penalty, in `[0, 1]`.
    pub rho: f64,
    pub solver: Solver,
    pub init: Init,
    /// Stop once `|obj_t − obj_{t−1}| / obj_0 < tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        Self {
            k: 4,
            beta: 2.0,
            alpha: 0.0,
            rho: 0.0,
            solver: Solver::default(),
            init: Init::default(),
            tol: 1e-5,
            max_iter: 500,
            seed: 0,
        }
    }
}

impl NmfConfig {
    /// Checks the parameters on their own, without a data shape.
    pub fn validate_params(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k == 0 {
            return bad("k = 0 out of range: need 1 <= k < min(n, m)".into());
        }
        if ![0.0, 1.0, 2.0].contains(&self.beta) {
            return bad(format!("beta must be 0, 1 or 2, got {}", self.beta));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be finite and non-negative, got {}", self.alpha));
        }
        if self.alpha > 0.0 && self.beta != 2.0 {
            return bad("alpha > 0 requires beta = 2".into());
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1], got {}", self.rho));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if self.solver == Solver::CoordinateDescent && self.beta != 2.0 {
            return bad("coordinate descent requires beta = 2".into());
        }
        Ok(())
    }

    /// Full validation against an `n × m` data matrix.
    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        let limit = n.min(m);
        if self.k == 0 || self.k >= limit {
            return Err(Error::InvalidConfig(format!(
                "k = {} out of range: need 1 <= k < min(n, m) = {limit}",
                self.k
            )));
        }
        self.validate_params()
    }

    /// L1 and ridge coefficients of the penalty: `(ρα, α(1−ρ))`.
    pub(crate) fn penalties(&self) -> (f64, f64) {
        (self.rho * self.alpha, self.alpha * (1.0 - self.rho))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factorization {
    pub w: Array2<f64>,
    pub h: Array2<f64>,
    /// Objective at initialization followed by one entry per iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl Factorization {
    pub fn k(&self) -> usize {
        self.w.ncols()
    }

    pub fn reconstruct(&self) -> Array2<f64> {
        self.w.dot(&self.h)
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial objective")
    }
}

pub(crate) fn check_factors(x: &Array2<f64>, w: &Array2<f64>, h: &Array2<f64>) -> Result<()> {
    let (n, m) = x.dim();
    if w.nrows() != n || h.ncols() != m || w.ncols() != h.nrows() {
        return Err(Error::ShapeMismatch {
            expected: (n, m),
            found: (w.nrows(), h.ncols()),
        });
    }
    if w.iter().chain(h.iter()).any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("initial factors must be finite and non-negative".into()));
    }
    Ok(())
}

/// Runs `sweep` until the relative objective change drops below `tol`.
pub(crate) fn iterate<F>(
    x: &Array2<f64>,
    mut w: Array2<f64>,
    mut h: Array2<f64>,
    config: &NmfConfig,
    mut sweep: F,
) -> Result<Factorization>
where
    F: FnMut(&Array2<f64>, &mut Array2<f64>, &mut Array2<f64>),
{
    let initial = objective(x, &w, &h, config)?;
    if !initial.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: 0 });
    }
    let scale = if initial > 0.0 { initial } else { 1.0 };
    let mut trace = Vec::with_capacity(config.max_iter + 1);
    trace.push(initial);

    let mut prev = initial;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=config.max_iter {
        sweep(x, &mut w, &mut h);
        let obj = objective(x, &w, &h, config)?;
        if !obj.is_finite() {
            return Err(Error::NonFiniteObjective { iteration: it });
        }
        trace.push(obj);
        iterations = it;
        if (prev - obj).abs() < config.tol * scale || prev == obj {
            converged = true;
            break;
        }
        prev = obj;
    }

    Ok(Factorization {
        w,
        h,
        objective_trace: trace,
        iterations,
        converged,
    })
}

/// Initializes per `config.init` and runs `config.solver`.
///
/// Deterministic in `(x, config)`. An all-zero `x` returns zero factors
/// without iterating.
pub fn fit(x: &Array2<f64>, config: &NmfConfig) -> Result<Factorization> {
    let (n, m) = x.dim();
    config.validate(n, m)?;
    if x.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("X must be finite and non-negative".into()));
    }
    if config.beta == 0.0 && x.iter().any(|v| *v == 0.0) {
        return Err(Error::Domain(
            "Itakura-Saito objective is undefined for zero entries in X".into(),
        ));
    }

    if x.iter().all(|v| *v == 0.0) {
        let w = Array2::zeros((n, config.k));
        let h = Array2::zeros((config.k, m));
        let obj = objective(x, &w, &h, config)?;
        return Ok(Factorization {
            w,
            h,
            objective_trace: vec![obj],
            iterations: 0,
            converged: true,
        });
    }

    let (w0, h0) = initialize(x, config)?;
    match config.solver {
        Solver::Multiplicative => solve_mu(x, w0, h0, config),
        Solver::CoordinateDescent => solve_cd(x, w0, h0, config),
    }
}
