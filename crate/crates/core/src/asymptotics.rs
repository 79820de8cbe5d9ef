//! Plug-in sandwich covariances `Psi_dot^{-1} Sigma Psi_dot^{-1}` for the
//! median and for joint geometric quantiles.
//!
//! Covariances are reported for the `sqrt(n)`-scaled estimator.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::{matrix_rows, DataMatrix};
use crate::error::{Error, Result};
use crate::lp_core::{accumulate_psi_dot, accumulate_sigma, norm_p, score_from_diff, Direction, NormSpec};

const MAX_CONDITION: f64 = 1e12;
const COINCIDENCE_TOL: f64 = 1e-12;

/// What to do with rows that coincide with the evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CoincidencePolicy {
    /// Drop the row and average over the remaining `n'` rows.
    #[default]
    Exclude,
    /// Keep the row with a zero score and zero derivative; average over `n`.
    ZeroScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichEstimate {
    #[serde(with = "matrix_rows")]
    pub psi_dot_hat: DMatrix<f64>,
    #[serde(with = "matrix_rows")]
    pub sigma_hat: DMatrix<f64>,
    #[serde(with = "matrix_rows")]
    pub cov: DMatrix<f64>,
    pub center: Vec<f64>,
    /// Rows entering the averages.
    pub n_used: usize,
    pub n_total: usize,
}

impl SandwichEstimate {
    /// Covariance of the unscaled estimator, `cov / n`.
    pub fn per_observation_cov(&self) -> DMatrix<f64> {
        &self.cov / self.n_total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileCovariance {
    pub directions: Vec<Direction>,
    /// `blocks[j][l]` is the `k x k` covariance between directions `j` and `l`.
    #[serde(with = "block_rows")]
    pub blocks: Vec<Vec<DMatrix<f64>>>,
}

mod block_rows {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &[Vec<DMatrix<f64>>], s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<Vec<Vec<Vec<f64>>>> = b.iter().map(|r| r.iter().map(matrix_rows::to_rows).collect()).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<DMatrix<f64>>>, D::Error> {
        let v = Vec::<Vec<Vec<Vec<f64>>>>::deserialize(d)?;
        v.iter()
            .map(|r| {
                r.iter()
                    .map(|m| matrix_rows::from_rows(m).ok_or_else(|| serde::de::Error::custom("ragged block")))
                    .collect()
            })
            .collect()
    }
}

impl QuantileCovariance {
    pub fn m(&self) -> usize {
        self.blocks.len()
    }

    /// The assembled `mk x mk` matrix.
    pub fn full(&self) -> DMatrix<f64> {
        let m = self.m();
        let k = self.blocks[0][0].nrows();
        let mut out = DMatrix::zeros(m * k, m * k);
        for (j, row) in self.blocks.iter().enumerate() {
            for (l, b) in row.iter().enumerate() {
                out.view_mut((j * k, l * k), (k, k)).copy_from(b);
            }
        }
        out
    }
}

/// Plug-in sandwich covariance of the lp-median at `theta_hat`.
pub fn sandwich(data: &DataMatrix, theta_hat: &[f64], spec: &NormSpec) -> Result<SandwichEstimate> {
    sandwich_with(data, theta_hat, spec, CoincidencePolicy::Exclude)
}

pub fn sandwich_with(
    data: &DataMatrix,
    theta_hat: &[f64],
    spec: &NormSpec,
    policy: CoincidencePolicy,
) -> Result<SandwichEstimate> {
    let dirs = [Direction::zero(data.k())];
    let est = estimate_blocks(data, &[theta_hat.to_vec()], &dirs, spec, policy)?;
    let Blocks {
        mut hessians,
        mut sigma,
        mut covs,
        n_used,
    } = est;
    Ok(SandwichEstimate {
        psi_dot_hat: hessians.remove(0),
        sigma_hat: sigma.remove(0).remove(0),
        cov: covs.remove(0).remove(0),
        center: theta_hat.to_vec(),
        n_used: n_used[0],
        n_total: data.n(),
    })
}

/// Plug-in joint covariance of geometric quantile estimates at several
/// directions.
pub fn quantile_sandwich(
    data: &DataMatrix,
    estimates: &[Vec<f64>],
    directions: &[Direction],
    spec: &NormSpec,
) -> Result<QuantileCovariance> {
    if estimates.len() != directions.len() || directions.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: directions.len(),
            got: estimates.len(),
        });
    }
    let b = estimate_blocks(data, estimates, directions, spec, CoincidencePolicy::Exclude)?;
    Ok(QuantileCovariance {
        directions: directions.to_vec(),
        blocks: b.covs,
    })
}

struct Blocks {
    hessians: Vec<DMatrix<f64>>,
    sigma: Vec<Vec<DMatrix<f64>>>,
    covs: Vec<Vec<DMatrix<f64>>>,
    n_used: Vec<usize>,
}

fn estimate_blocks(
    data: &DataMatrix,
    centers: &[Vec<f64>],
    directions: &[Direction],
    spec: &NormSpec,
    policy: CoincidencePolicy,
) -> Result<Blocks> {
    let k = data.k();
    let n = data.n();
    let m = centers.len();
    for (c, u) in centers.iter().zip(directions) {
        if c.len() != k || u.k() != k {
            return Err(Error::DimensionMismatch { expected: k, got: c.len() });
        }
    }

    // per row and direction: score (psi - u) and the raw residual x - center
    let mut hessians = vec![DMatrix::<f64>::zeros(k, k); m];
    let mut used = vec![0usize; m];
    let mut sigma = vec![vec![DMatrix::<f64>::zeros(k, k); m]; m];
    let mut pair_used = vec![vec![0usize; m]; m];
    let mut d = vec![0.0; k];
    let mut r = vec![0.0; k];
    let mut scores = vec![vec![0.0; k]; m];
    let mut norms = vec![0.0; m];
    let mut active = vec![false; m];
    let same = |j: usize, l: usize| directions[j] == directions[l] && centers[j] == centers[l];

    for x in data.rows() {
        for j in 0..m {
            let c = &centers[j];
            for i in 0..k {
                d[i] = c[i] - x[i];
            }
            let radius = COINCIDENCE_TOL * (1.0 + c.iter().fold(0.0_f64, |a, v| a.max(v.abs())));
            let nrm = norm_p(&d, spec);
            norms[j] = nrm;
            active[j] = nrm > radius;
            if !active[j] {
                continue;
            }
            score_from_diff(&d, spec, &mut scores[j]);
            for (s, u) in scores[j].iter_mut().zip(directions[j].as_slice()) {
                *s -= u;
            }
            accumulate_psi_dot(&d, nrm, spec, 1.0, &mut hessians[j])?;
            used[j] += 1;
        }
        for j in 0..m {
            for l in 0..m {
                if !(active[j] && active[l]) {
                    continue;
                }
                pair_used[j][l] += 1;
                if same(j, l) && directions[j].is_zero() {
                    for i in 0..k {
                        r[i] = x[i] - centers[j][i];
                    }
                    accumulate_sigma(&r, norms[j], spec, 1.0, &mut sigma[j][l]);
                } else {
                    let (sj, sl) = (&scores[j], &scores[l]);
                    for a in 0..k {
                        for b in 0..k {
                            sigma[j][l][(a, b)] += sj[a] * sl[b];
                        }
                    }
                }
            }
        }
    }

    let mut inverses = Vec::with_capacity(m);
    for j in 0..m {
        if used[j] < k + 1 {
            return Err(Error::InsufficientData(format!(
                "only {} non-coincident rows for a {k}-dimensional estimate",
                used[j]
            )));
        }
        let denom = match policy {
            CoincidencePolicy::Exclude => used[j],
            CoincidencePolicy::ZeroScore => n,
        } as f64;
        hessians[j] /= denom;
        let h = &hessians[j];
        let h = (h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h.clone());
        let lmax = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
        if condition > MAX_CONDITION {
            return Err(Error::Unstable { condition });
        }
        hessians[j] = h;
        inverses.push(
            hessians[j]
                .clone()
                .try_inverse()
                .ok_or(Error::Unstable { condition })?,
        );
    }
    let mut covs = vec![vec![DMatrix::<f64>::zeros(k, k); m]; m];
    for j in 0..m {
        for l in 0..m {
            let denom = match policy {
                CoincidencePolicy::Exclude => pair_used[j][l].max(1),
                CoincidencePolicy::ZeroScore => n,
            } as f64;
            sigma[j][l] /= denom;
            let mut c = &inverses[j] * &sigma[j][l] * &inverses[l];
            if j == l {
                c = (&c + c.transpose()) * 0.5;
            }
            covs[j][l] = c;
        }
    }
    Ok(Blocks {
        hessians,
        sigma,
        covs,
        n_used: used,
    })
}
