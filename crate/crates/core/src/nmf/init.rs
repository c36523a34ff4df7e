use ndarray::{Array1, Array2};
use rand::distr::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::svd::truncated_svd;
use super::{Init, NmfConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NndsvdVariant {
    /// Zeros stay zero.
    Plain,
    /// Zeros become `mean(X)`.
    FillMean,
    /// Zeros become `Uniform(0, mean(X)/100)` draws.
    FillRandom,
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `W0` (`n × k`) then `H0` (`k × m`), entries i.i.d. `Uniform[0, 1)`,
/// both drawn in row-major order from one seeded stream.
pub fn init_random(n: usize, m: usize, k: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
    let mut rng = rng(seed);
    let w = Array2::from_shape_fn((n, k), |_| rng.random::<f64>());
    let h = Array2::from_shape_fn((k, m), |_| rng.random::<f64>());
    (w, h)
}

fn split_norms(a: &Array1<f64>) -> (Array1<f64>, f64, Array1<f64>, f64) {
    let pos = a.mapv(|v| v.max(0.0));
    let neg = a.mapv(|v| (-v).max(0.0));
    let pn = pos.dot(&pos).sqrt();
    let nn = neg.dot(&neg).sqrt();
    (pos, pn, neg, nn)
}

/// Non-negative double SVD initialization.
///
/// The leading singular pair enters as `|u₁|, |v₁|`. For every later pair
/// the positive and negative parts are compared by `‖u±‖‖v±‖`; the larger
/// branch `μ` is normalized and scaled by `√(σ_j μ)` on both sides.
pub fn init_nndsvd(
    x: &Array2<f64>,
    k: usize,
    variant: NndsvdVariant,
    seed: u64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if x.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidInput("NNDSVD needs a non-negative matrix".into()));
    }
    let (n, m) = x.dim();
    let svd = truncated_svd(x, k)?;
    let mut w = Array2::zeros((n, k));
    let mut h = Array2::zeros((k, m));

    let lead = svd.sigma[0].sqrt();
    w.column_mut(0).assign(&svd.u.column(0).mapv(|v| lead * v.abs()));
    h.row_mut(0).assign(&svd.v.column(0).mapv(|v| lead * v.abs()));

    for j in 1..k {
        let (up, upn, un, unn) = split_norms(&svd.u.column(j).to_owned());
        let (vp, vpn, vn, vnn) = split_norms(&svd.v.column(j).to_owned());
        let (mu_pos, mu_neg) = (upn * vpn, unn * vnn);
        let (u, un_norm, v, vn_norm, mu) = if mu_pos > mu_neg {
            (up, upn, vp, vpn, mu_pos)
        } else {
            (un, unn, vn, vnn, mu_neg)
        };
        if mu == 0.0 {
            continue;
        }
        let scale = (svd.sigma[j] * mu).sqrt();
        w.column_mut(j).assign(&(u * (scale / un_norm)));
        h.row_mut(j).assign(&(v * (scale / vn_norm)));
    }

    let mean = x.mean().unwrap_or(0.0);
    match variant {
        NndsvdVariant::Plain => {}
        NndsvdVariant::FillMean => {
            w.mapv_inplace(|v| if v == 0.0 { mean } else { v });
            h.mapv_inplace(|v| if v == 0.0 { mean } else { v });
        }
        NndsvdVariant::FillRandom => {
            let mut rng = rng(seed);
            let scale = mean / 100.0;
            for v in w.iter_mut().chain(h.iter_mut()) {
                if *v == 0.0 {
                    let u: f64 = Open01.sample(&mut rng);
                    *v = scale * u;
                }
            }
        }
    }
    Ok((w, h))
}

/// Starting factors according to `config.init`.
pub fn initialize(x: &Array2<f64>, config: &NmfConfig) -> Result<(Array2<f64>, Array2<f64>)> {
    let (n, m) = x.dim();
    let variant = match config.init {
        Init::Random => return Ok(init_random(n, m, config.k, config.seed)),
        Init::Nndsvd => NndsvdVariant::Plain,
        Init::Nndsvda => NndsvdVariant::FillMean,
        Init::Nndsvdar => NndsvdVariant::FillRandom,
    };
    init_nndsvd(x, config.k, variant, config.seed)
}
