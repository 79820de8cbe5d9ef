//! Credible regions built from posterior draws: coordinatewise percentile
//! boxes and Mahalanobis ellipsoids.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::{matrix_rows, DataMatrix};
use crate::error::{Error, Result};

/// Linear interpolation between order statistics ("type 7"): position
/// `h = (N - 1) prob` in the sorted sample, 0-based.
pub fn empirical_quantile(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("credible level must lie in (0, 1), got {level}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperrectangle {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub level: f64,
}

impl Hyperrectangle {
    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }

    pub fn mean_width(&self) -> f64 {
        let w = self.widths();
        w.iter().sum::<f64>() / w.len() as f64
    }

    /// Length of the main diagonal, the largest distance between two points
    /// of the box.
    pub fn diameter(&self) -> f64 {
        self.widths().iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// Per-coordinate membership of a point.
    pub fn contains_coordinates(&self, point: &[f64]) -> Result<Vec<bool>> {
        if point.len() != self.lo.len() {
            return Err(Error::DimensionMismatch {
                expected: self.lo.len(),
                got: point.len(),
            });
        }
        Ok(point
            .iter()
            .enumerate()
            .map(|(j, x)| self.lo[j] <= *x && *x <= self.hi[j])
            .collect())
    }
}

/// `{theta : (theta - center)' shape^{-1} (theta - center) <= radius}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: Vec<f64>,
    #[serde(with = "matrix_rows")]
    pub shape: DMatrix<f64>,
    pub radius: f64,
    pub level: f64,
}

impl Ellipsoid {
    /// Squared Mahalanobis distance of `point` from the center.
    pub fn mahalanobis(&self, point: &[f64]) -> Result<f64> {
        let k = self.center.len();
        if point.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: point.len() });
        }
        let chol = self
            .shape
            .clone()
            .cholesky()
            .ok_or_else(|| Error::DegenerateGeometry("ellipsoid shape matrix is singular".into()))?;
        let d = DVector::from_iterator(k, point.iter().zip(&self.center).map(|(x, c)| x - c));
        let z = chol.l().solve_lower_triangular(&d).expect("cholesky factor is invertible");
        Ok(z.norm_squared())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CredibleRegion {
    Hyperrectangle(Hyperrectangle),
    Ellipsoid(Ellipsoid),
}

impl CredibleRegion {
    /// Box diameter or ellipsoid radius.
    pub fn size(&self) -> f64 {
        match self {
            CredibleRegion::Hyperrectangle(h) => h.diameter(),
            CredibleRegion::Ellipsoid(e) => e.radius,
        }
    }
}

/// Coordinatewise `(1 - level)/2` and `(1 + level)/2` percentiles.
pub fn hyperrectangle(draws: &DataMatrix, level: f64) -> Result<Hyperrectangle> {
    check_level(level)?;
    if draws.n() < 2 {
        return Err(Error::InsufficientData("need at least two draws".into()));
    }
    let (mut lo, mut hi) = (Vec::with_capacity(draws.k()), Vec::with_capacity(draws.k()));
    for j in 0..draws.k() {
        let mut col = draws.column(j);
        col.sort_by(f64::total_cmp);
        lo.push(empirical_quantile(&col, 0.5 * (1.0 - level)));
        hi.push(empirical_quantile(&col, 0.5 * (1.0 + level)));
    }
    Ok(Hyperrectangle { lo, hi, level })
}

/// Ellipsoid centered at the draw mean with the divisor-`N` draw covariance as
/// shape and the `level` quantile of the draws' Mahalanobis values as radius.
pub fn ellipsoid(draws: &DataMatrix, level: f64) -> Result<Ellipsoid> {
    check_level(level)?;
    let (n, k) = (draws.n(), draws.k());
    if n <= k {
        return Err(Error::InsufficientData(format!("need more than {k} draws, got {n}")));
    }
    let center = draws.mean();
    let mut shape = DMatrix::<f64>::zeros(k, k);
    for r in draws.rows() {
        for i in 0..k {
            for j in 0..k {
                shape[(i, j)] += (r[i] - center[i]) * (r[j] - center[j]);
            }
        }
    }
    shape /= n as f64;
    let chol = shape
        .clone()
        .cholesky()
        .ok_or_else(|| Error::DegenerateGeometry("draw covariance is singular".into()))?;
    let l = chol.l();
    let mut dist: Vec<f64> = draws
        .rows()
        .map(|r| {
            let d = DVector::from_iterator(k, r.iter().zip(&center).map(|(x, c)| x - c));
            l.solve_lower_triangular(&d).expect("invertible factor").norm_squared()
        })
        .collect();
    dist.sort_by(f64::total_cmp);
    let radius = empirical_quantile(&dist, level);
    Ok(Ellipsoid {
        center,
        shape,
        radius,
        level,
    })
}

pub fn contains(region: &CredibleRegion, point: &[f64]) -> Result<bool> {
    match region {
        CredibleRegion::Hyperrectangle(h) => Ok(h.contains_coordinates(point)?.into_iter().all(|b| b)),
        CredibleRegion::Ellipsoid(e) => Ok(e.mahalanobis(point)? <= e.radius),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipalAxes {
    /// Unit axes, ordered by decreasing eigenvalue of the shape matrix.
    pub axes: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// `sqrt(radius * eigenvalue)`.
    pub semi_axes: Vec<f64>,
}

pub fn principal_axes(e: &Ellipsoid) -> Result<PrincipalAxes> {
    let k = e.center.len();
    if e.shape.nrows() != k || e.shape.ncols() != k {
        return Err(Error::DimensionMismatch { expected: k, got: e.shape.nrows() });
    }
    let sym = (&e.shape + e.shape.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut axes = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for &i in &order {
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        if let Some(first) = v.iter().find(|x| **x != 0.0) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        axes.push(v);
        eigenvalues.push(eig.eigenvalues[i].max(0.0));
    }
    let semi_axes = eigenvalues.iter().map(|l| (e.radius * l).sqrt()).collect();
    Ok(PrincipalAxes {
        axes,
        eigenvalues,
        semi_axes,
    })
}

/// Boundary of a 2-D ellipse as `points` vertices
/// `center + sqrt(r) (cos t sqrt(l1) v1 + sin t sqrt(l2) v2)`.
pub fn ellipse_polyline(e: &Ellipsoid, points: usize) -> Result<Vec<[f64; 2]>> {
    if e.center.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: e.center.len() });
    }
    let ax = principal_axes(e)?;
    Ok((0..points)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / points as f64;
            let (a, b) = (t.cos() * ax.semi_axes[0], t.sin() * ax.semi_axes[1]);
            [
                e.center[0] + a * ax.axes[0][0] + b * ax.axes[1][0],
                e.center[1] + a * ax.axes[0][1] + b * ax.axes[1][1],
            ]
        })
        .collect())
}
