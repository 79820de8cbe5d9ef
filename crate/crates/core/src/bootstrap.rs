//! Bayesian-bootstrap posterior sampling of medians and geometric quantiles.
//!
//! The posterior of a Dirichlet-process prior is replaced by its Bayesian
//! bootstrap limit: each draw reweights the observations with a
//! Dirichlet(1, ..., 1) vector and re-solves for the functional.

use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, WeightVector};
use crate::error::{Error, Result};
use crate::lp_core::{Direction, NormSpec};
use crate::rng::RngSeed;
use crate::solver::{geometric_quantile, solve_unchecked, SolverOptions};

/// Dirichlet(1, ..., 1) weights built as normalized standard exponentials.
pub fn dirichlet_weights(n: usize, seed: RngSeed) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::InvalidInput("Dirichlet weights need n >= 1".into()));
    }
    let mut rng = seed.rng();
    let y: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
    WeightVector::normalized(y)
}

/// `N` joint posterior draws of `m` quantile functionals; row `t` holds the
/// `m` solutions (each a `k`-vector) for the `t`-th weight vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub k: usize,
    pub directions: Vec<Direction>,
    /// Row-major `N x (m k)`.
    pub draws: Vec<f64>,
    /// Point estimates the draws were warm-started from, one per direction.
    pub centers: Vec<Vec<f64>>,
    pub n_data: usize,
    pub spec: NormSpec,
    pub seed: RngSeed,
    /// Draws dropped after a failed retry.
    pub dropped: usize,
    /// Row indices of the transformation subset, for affine-equivariant draws.
    pub alpha: Option<Vec<usize>>,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.draws.len() / self.width()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn m(&self) -> usize {
        self.directions.len()
    }

    fn width(&self) -> usize {
        self.k * self.directions.len()
    }

    pub fn draw(&self, t: usize) -> &[f64] {
        let w = self.width();
        &self.draws[t * w..(t + 1) * w]
    }

    /// The `N x k` draws of direction `l`.
    pub fn block(&self, l: usize) -> DataMatrix {
        let k = self.k;
        let values = (0..self.len())
            .flat_map(|t| self.draw(t)[l * k..(l + 1) * k].iter().copied())
            .collect();
        DataMatrix::new(self.len(), k, values).expect("draws are finite")
    }

    /// All columns as an `N x (m k)` matrix.
    pub fn joint(&self) -> DataMatrix {
        DataMatrix::new(self.len(), self.width(), self.draws.clone()).expect("draws are finite")
    }
}

/// Per-draw solve with a single retry under first-order damping.
pub(crate) fn solve_draw(
    data: &DataMatrix,
    w: &[f64],
    u: &Direction,
    spec: &NormSpec,
    init: &[f64],
    opts: &SolverOptions,
) -> Option<Vec<f64>> {
    let first = SolverOptions {
        skip_geometry_check: true,
        ..opts.clone()
    }
    .with_init(init.to_vec());
    match solve_unchecked(data, w, u.as_slice(), spec, &first) {
        Ok(r) if r.converged => return Some(r.minimizer),
        _ => {}
    }
    let retry = first.damped();
    match solve_unchecked(data, w, u.as_slice(), spec, &retry) {
        Ok(r) if r.converged => Some(r.minimizer),
        _ => None,
    }
}

pub(crate) fn check_dropped(dropped: usize, requested: usize) -> Result<()> {
    // more than 1% of the draws lost
    if dropped * 100 > requested {
        Err(Error::SamplerDegeneracy { dropped, requested })
    } else {
        Ok(())
    }
}

/// Joint Bayesian-bootstrap draws of the geometric quantiles at `directions`
/// (the median is the single direction `u = 0`).
pub fn posterior_sample(
    data: &DataMatrix,
    directions: &[Direction],
    spec: &NormSpec,
    n_draws: usize,
    seed: RngSeed,
    opts: &SolverOptions,
) -> Result<PosteriorDraws> {
    if n_draws == 0 {
        return Err(Error::InvalidInput("need at least one posterior draw".into()));
    }
    if directions.is_empty() {
        return Err(Error::InvalidInput("need at least one direction".into()));
    }
    let n = data.n();
    let k = data.k();
    let uniform = WeightVector::uniform(n);
    let centers = directions
        .iter()
        .map(|u| geometric_quantile(data, &uniform, u, spec, opts).map(|r| r.minimizer))
        .collect::<Result<Vec<_>>>()?;

    let rows: Vec<Option<Vec<f64>>> = (0..n_draws as u64)
        .into_par_iter()
        .map(|t| {
            let w = dirichlet_weights(n, seed.with_stream(t)).ok()?;
            let mut row = Vec::with_capacity(k * directions.len());
            for (u, c) in directions.iter().zip(&centers) {
                row.extend(solve_draw(data, w.as_slice(), u, spec, c, opts)?);
            }
            Some(row)
        })
        .collect();
    let dropped = rows.iter().filter(|r| r.is_none()).count();
    check_dropped(dropped, n_draws)?;
    let draws = rows.into_iter().flatten().flatten().collect();
    Ok(PosteriorDraws {
        k,
        directions: directions.to_vec(),
        draws,
        centers,
        n_data: n,
        spec: *spec,
        seed,
        dropped,
        alpha: None,
    })
}
