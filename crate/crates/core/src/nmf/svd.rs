//! Truncated SVD via one-sided Jacobi rotations.
//!
//! Working on the matrix itself rather than its Gram matrix keeps small
//! singular values accurate to about `ε‖X‖`, so rank deficiency shows up as
//! singular values near machine zero rather than near `√ε‖X‖`.
//!
//! The rotation order is fixed, so results are deterministic for a given
//! input.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Top-`k` singular triplets `X ≈ U diag(σ) Vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdTriplets {
    /// `n × k`, orthonormal columns.
    pub u: Array2<f64>,
    /// Non-increasing, non-negative.
    pub sigma: Array1<f64>,
    /// `m × k`, orthonormal columns.
    pub v: Array2<f64>,
}

impl SvdTriplets {
    pub fn reconstruct(&self) -> Array2<f64> {
        let scaled = &self.u * &self.sigma;
        scaled.dot(&self.v.t())
    }
}

/// Column-major working copy; rotations touch two columns at a time.
struct Columns {
    rows: usize,
    data: Vec<f64>,
}

impl Columns {
    fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    fn rotate(&mut self, i: usize, j: usize, c: f64, s: f64) {
        let rows = self.rows;
        let (lo, hi) = self.data.split_at_mut(j * rows);
        let a = &mut lo[i * rows..(i + 1) * rows];
        let b = &mut hi[..rows];
        for (x, y) in a.iter_mut().zip(b.iter_mut()) {
            let (xi, yi) = (*x, *y);
            *x = c * xi - s * yi;
            *y = s * xi + c * yi;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Thin SVD of a `p × q` matrix with `p ≥ q`: returns (U p×q, σ, V q×q),
/// unsorted.
fn jacobi(a: &Array2<f64>) -> Result<(Columns, Vec<f64>, Columns)> {
    let (p, q) = a.dim();
    let mut work = Columns {
        rows: p,
        data: a.t().iter().copied().collect(),
    };
    let mut v = Columns {
        rows: q,
        data: (0..q * q).map(|i| if i % (q + 1) == 0 { 1.0 } else { 0.0 }).collect(),
    };
    let tol = f64::EPSILON * (p as f64).sqrt();
    // Columns at rounding level carry no direction worth orthogonalizing.
    let fro2: f64 = work.data.iter().map(|v| v * v).sum();
    let negligible = (f64::EPSILON * f64::EPSILON) * fro2;

    let mut converged = q < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for i in 0..q {
            for j in i + 1..q {
                let alpha = dot(work.col(i), work.col(i));
                let beta = dot(work.col(j), work.col(j));
                let gamma = dot(work.col(i), work.col(j));
                if gamma == 0.0
                    || alpha.min(beta) <= negligible
                    || gamma.abs() <= tol * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                work.rotate(i, j, c, s);
                v.rotate(i, j, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::SvdConvergence { sweeps: MAX_SWEEPS });
    }

    let sigma: Vec<f64> = (0..q).map(|j| dot(work.col(j), work.col(j)).sqrt()).collect();
    Ok((work, sigma, v))
}

/// Gram–Schmidt completion: orthonormal vector orthogonal to `basis`.
fn complete(basis: &[Vec<f64>], len: usize) -> Vec<f64> {
    for e in 0..len {
        let mut cand = vec![0.0; len];
        cand[e] = 1.0;
        for _ in 0..2 {
            for b in basis {
                let proj = dot(&cand, b);
                cand.iter_mut().zip(b).for_each(|(c, bv)| *c -= proj * bv);
            }
        }
        let norm = dot(&cand, &cand).sqrt();
        if norm > 0.5 {
            cand.iter_mut().for_each(|c| *c /= norm);
            return cand;
        }
    }
    unreachable!("basis of {} vectors cannot span {len} dimensions", basis.len())
}

/// Entry of largest magnitude, first one on ties.
fn leading_entry(values: impl Iterator<Item = f64>) -> f64 {
    values
        .fold((0.0f64, 0.0f64), |(best, val), v| {
            if v.abs() > best {
                (v.abs(), v)
            } else {
                (best, val)
            }
        })
        .1
}

/// Top-`k` singular triplets of `x`, largest first.
///
/// Sign convention: the largest-magnitude entry of each `U` column is
/// non-negative (first such entry on ties), with `V` flipped to match.
pub fn truncated_svd(x: &Array2<f64>, k: usize) -> Result<SvdTriplets> {
    let (n, m) = x.dim();
    if k == 0 || k > n.min(m) {
        return Err(Error::InvalidConfig(format!(
            "SVD rank {k} outside 1..={}",
            n.min(m)
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix contains non-finite values".into()));
    }

    let transposed = n < m;
    let a = if transposed { x.t().to_owned() } else { x.clone() };
    let (work, sigma, right) = jacobi(&a)?;
    let (p, q) = a.dim();

    // Stable sort keeps index order among equal singular values.
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));

    let sigma_max = sigma[order[0]];
    let negligible = sigma_max * f64::EPSILON * (p.max(q) as f64);
    let mut left: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut rvecs: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut svals = Vec::with_capacity(k);
    for &j in order.iter().take(k) {
        let s = sigma[j];
        let col = if s > negligible && s > 0.0 {
            work.col(j).iter().map(|v| v / s).collect()
        } else {
            complete(&left, p)
        };
        left.push(col);
        rvecs.push(right.col(j).to_vec());
        svals.push(s);
    }

    let to_matrix = |cols: &[Vec<f64>], rows: usize| {
        Array2::from_shape_fn((rows, k), |(i, j)| cols[j][i])
    };
    // X = Aᵀ = V_A Σ U_Aᵀ when the working matrix was transposed.
    let (mut u, mut v) = if transposed {
        (to_matrix(&rvecs, q), to_matrix(&left, p))
    } else {
        (to_matrix(&left, p), to_matrix(&rvecs, q))
    };
    for j in 0..k {
        if leading_entry(u.column(j).iter().copied()) < 0.0 {
            u.column_mut(j).mapv_inplace(|x| -x);
            v.column_mut(j).mapv_inplace(|x| -x);
        }
    }

    Ok(SvdTriplets {
        u,
        sigma: Array1::from(svals),
        v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn orthonormality_error(a: &Array2<f64>) -> f64 {
        let gram = a.t().dot(a);
        let mut worst = 0.0f64;
        for ((i, j), v) in gram.indexed_iter() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - target).abs());
        }
        worst
    }

    #[test]
    fn diagonal() {
        let x = array![[3.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]];
        let svd = truncated_svd(&x, 2).unwrap();
        assert_abs_diff_eq!(svd.sigma[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(svd.sigma[1], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn rank_one_has_zero_tail() {
        let u = array![1.0, 2.0, 0.5, 3.0];
        let v = array![0.3, 1.0, 2.0];
        let x = Array2::from_shape_fn((4, 3), |(i, j)| u[i] * v[j]);
        let svd = truncated_svd(&x, 3).unwrap();
        assert!(svd.sigma[1] < 1e-10, "sigma_2 = {}", svd.sigma[1]);
        assert!(svd.sigma[2] < 1e-10);
        assert!(orthonormality_error(&svd.u) < 1e-8);
        assert!(orthonormality_error(&svd.v) < 1e-8);
        // Non-negative rank-one input: leading vectors come out non-negative.
        assert!(svd.u.column(0).iter().all(|v| *v >= 0.0));
        assert!(svd.v.column(0).iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn wide_and_tall_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((6, 9), |_| rng.random::<f64>());
        let wide = truncated_svd(&x, 4).unwrap();
        let tall = truncated_svd(&x.t().to_owned(), 4).unwrap();
        for j in 0..4 {
            assert_abs_diff_eq!(wide.sigma[j], tall.sigma[j], epsilon = 1e-12);
        }
        assert!(orthonormality_error(&wide.u) < 1e-8);
        assert!(orthonormality_error(&wide.v) < 1e-8);
        let full = truncated_svd(&x, 6).unwrap();
        let err = (&full.reconstruct() - &x).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn sign_convention_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((7, 5), |_| rng.random::<f64>() - 0.5);
        let svd = truncated_svd(&x, 5).unwrap();
        for col in svd.u.columns() {
            let lead = col.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
            assert!(lead >= 0.0);
        }
    }

    #[test]
    fn zero_matrix() {
        let svd = truncated_svd(&Array2::zeros((4, 3)), 2).unwrap();
        assert!(svd.sigma.iter().all(|s| *s == 0.0));
        assert!(orthonormality_error(&svd.u) < 1e-12);
    }

    #[test]
    fn rank_bounds() {
        let x = Array2::<f64>::ones((3, 2));
        assert!(truncated_svd(&x, 0).is_err());
        assert!(truncated_svd(&x, 3).is_err());
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((12, 10), |_| rng.random::<f64>());
        assert_eq!(truncated_svd(&x, 4).unwrap(), truncated_svd(&x, 4).unwrap());
    }
}
