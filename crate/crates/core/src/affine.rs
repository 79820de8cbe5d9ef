//! Transformation-retransformation (TR) medians.
//!
//! A subset `alpha = {i0, ..., ik}` of `k + 1` rows defines the matrix
//! `X(alpha)` with columns `X_{i_j} - X_{i0}`. The remaining rows are mapped to
//! `Z_j = X(alpha)^{-1} X_j`, the median `phi` of the `Z`'s is computed and the
//! estimate `X(alpha) phi` is affine equivariant.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{posterior_sample, PosteriorDraws};
use crate::data::{matrix_rows, DataMatrix, WeightVector};
use crate::error::{Error, Result};
use crate::lp_core::{Direction, NormSpec};
use crate::rng::RngSeed;
use crate::solver::{weighted_median, SolverOptions};

pub const DEFAULT_CANDIDATES: usize = 500;
const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSubset {
    /// Sorted row indices; the first one is `i0`.
    pub indices: Vec<usize>,
    #[serde(with = "matrix_rows")]
    pub transform: DMatrix<f64>,
    /// Arithmetic over geometric mean of the eigenvalues of
    /// `X(alpha)' S^{-1} X(alpha)`.
    pub criterion: f64,
}

impl AlphaSubset {
    /// Builds the subset for the given rows, scoring it against the sample
    /// covariance of `data`.
    pub fn from_indices(data: &DataMatrix, indices: &[usize]) -> Result<Self> {
        let sigma_inv = inverse_covariance(data)?;
        let mut idx = indices.to_vec();
        idx.sort_unstable();
        evaluate(data, &sigma_inv, &idx).ok_or_else(|| {
            Error::DegenerateGeometry(format!("subset {idx:?} gives a singular transformation"))
        })
    }

    pub fn contains(&self, row: usize) -> bool {
        self.indices.binary_search(&row).is_ok()
    }
}

fn check_indices(data: &DataMatrix, idx: &[usize]) -> Result<()> {
    let k = data.k();
    if idx.len() != k + 1 {
        return Err(Error::InvalidInput(format!(
            "subset needs {} rows, got {}",
            k + 1,
            idx.len()
        )));
    }
    if idx.windows(2).any(|w| w[0] >= w[1]) || idx.iter().any(|&i| i >= data.n()) {
        return Err(Error::InvalidInput(format!(
            "subset rows must be distinct and below {}",
            data.n()
        )));
    }
    Ok(())
}

fn inverse_covariance(data: &DataMatrix) -> Result<DMatrix<f64>> {
    let s = data.sample_covariance()?;
    s.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::DegenerateGeometry("sample covariance is singular".into()))
}

fn transform_matrix(data: &DataMatrix, idx: &[usize]) -> DMatrix<f64> {
    let k = data.k();
    let base = data.row(idx[0]);
    DMatrix::from_fn(k, k, |i, j| data.row(idx[j + 1])[i] - base[i])
}

fn condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// `None` when `X(alpha)` is too ill-conditioned to invert.
fn evaluate(data: &DataMatrix, sigma_inv: &DMatrix<f64>, idx: &[usize]) -> Option<AlphaSubset> {
    let x = transform_matrix(data, idx);
    if !(condition(&x) < MAX_CONDITION) {
        return None;
    }
    let m = x.transpose() * sigma_inv * &x;
    let ev = SymmetricEigen::new((&m + m.transpose()) * 0.5).eigenvalues;
    if ev.iter().any(|l| !(*l > 0.0)) {
        return None;
    }
    let k = ev.len() as f64;
    let am = ev.iter().sum::<f64>() / k;
    let log_gm = ev.iter().map(|l| l.ln()).sum::<f64>() / k;
    // guard against rounding below the AM-GM bound
    let criterion = (am.ln() - log_gm).exp().max(1.0);
    Some(AlphaSubset {
        indices: idx.to_vec(),
        transform: x,
        criterion,
    })
}

fn binomial(n: usize, r: usize) -> u128 {
    let r = r.min(n - r);
    let mut c: u128 = 1;
    for i in 0..r {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > u64::MAX as u128 {
            return c;
        }
    }
    c
}

fn all_subsets(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..r).collect();
    loop {
        out.push(cur.clone());
        let mut i = r;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n - r + i {
                break;
            }
        }
        cur[i] += 1;
        for j in i + 1..r {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Picks the subset whose `X(alpha)' S^{-1} X(alpha)` is closest to a
/// multiple of the identity, as measured by the AM/GM eigenvalue ratio.
/// Every subset is tried when there are at most `n_candidates` of them;
/// otherwise `n_candidates` random subsets are drawn.
pub fn select_alpha(data: &DataMatrix, n_candidates: usize, seed: RngSeed) -> Result<AlphaSubset> {
    let (n, k) = (data.n(), data.k());
    if n <= k + 1 {
        return Err(Error::InsufficientData(format!(
            "need more than {} rows for a {k}-dimensional subset, got {n}",
            k + 1
        )));
    }
    if n_candidates == 0 {
        return Err(Error::InvalidInput("need at least one candidate subset".into()));
    }
    let sigma_inv = inverse_covariance(data)?;
    let candidates: Vec<Vec<usize>> = if binomial(n, k + 1) <= n_candidates as u128 {
        all_subsets(n, k + 1)
    } else {
        (0..n_candidates as u64)
            .map(|c| {
                let mut rng = seed.with_stream(c).rng();
                let mut idx = sample(&mut rng, n, k + 1).into_vec();
                idx.sort_unstable();
                idx
            })
            .collect()
    };
    let scored: Vec<Option<AlphaSubset>> = candidates
        .par_iter()
        .map(|idx| evaluate(data, &sigma_inv, idx))
        .collect();
    scored
        .into_iter()
        .flatten()
        .min_by(|a, b| a.criterion.total_cmp(&b.criterion).then_with(|| a.indices.cmp(&b.indices)))
        .ok_or_else(|| Error::DegenerateGeometry("every candidate subset is singular".into()))
}

/// The transformed points `Z_j = X(alpha)^{-1} X_j` for the rows outside
/// `alpha`, in row order.
pub fn transformed_data(data: &DataMatrix, alpha: &AlphaSubset) -> Result<DataMatrix> {
    check_indices(data, &alpha.indices)?;
    let k = data.k();
    if alpha.transform.nrows() != k || alpha.transform.ncols() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: alpha.transform.nrows(),
        });
    }
    let rest: Vec<usize> = (0..data.n()).filter(|i| !alpha.contains(*i)).collect();
    if rest.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "only {} rows remain outside the subset",
            rest.len()
        )));
    }
    let lu = alpha.transform.clone().lu();
    let mut values = Vec::with_capacity(rest.len() * k);
    for i in rest {
        let x = DVector::from_column_slice(data.row(i));
        let z = lu
            .solve(&x)
            .ok_or_else(|| Error::DegenerateGeometry("transformation matrix is singular".into()))?;
        values.extend(z.iter());
    }
    DataMatrix::new(values.len() / k, k, values)
}

fn retransform(alpha: &AlphaSubset, phi: &[f64]) -> Vec<f64> {
    (&alpha.transform * DVector::from_column_slice(phi)).iter().copied().collect()
}

/// `X(alpha) phi`, where `phi` is the lp-median of the transformed points.
pub fn tr_median(
    data: &DataMatrix,
    alpha: &AlphaSubset,
    spec: &NormSpec,
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let z = transformed_data(data, alpha)?;
    let phi = weighted_median(&z, &WeightVector::uniform(z.n()), spec, opts)?;
    Ok(retransform(alpha, &phi.minimizer))
}

/// Bayesian-bootstrap draws of the TR median: Dirichlet weights over the
/// `n - (k + 1)` transformed points, each draw mapped back by `X(alpha)`.
pub fn tr_posterior_sample(
    data: &DataMatrix,
    alpha: &AlphaSubset,
    spec: &NormSpec,
    n_draws: usize,
    seed: RngSeed,
    opts: &SolverOptions,
) -> Result<PosteriorDraws> {
    let z = transformed_data(data, alpha)?;
    let k = z.k();
    let mut post = posterior_sample(&z, &[Direction::zero(k)], spec, n_draws, seed, opts)?;
    post.draws = post
        .draws
        .chunks_exact(k)
        .flat_map(|phi| retransform(alpha, phi))
        .collect();
    post.centers = post.centers.iter().map(|c| retransform(alpha, c)).collect();
    post.alpha = Some(alpha.indices.clone());
    Ok(post)
}
