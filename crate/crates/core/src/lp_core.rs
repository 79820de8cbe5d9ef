//! Pure lp geometry: norms, the quantile loss `Phi_p`, the estimating-equation
//! score and its derivative.
//!
//! Every function here is a pure function of its arguments. The public
//! functions validate their inputs; the `pub(crate)` kernels skip validation
//! and are what the solver and the covariance estimators call in hot loops.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The norm exponent `p > 1` together with its conjugate `q = p / (p - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNormSpec", into = "RawNormSpec")]
pub struct NormSpec {
    p: f64,
    q: f64,
}

#[derive(Serialize, Deserialize)]
struct RawNormSpec {
    p: f64,
    q: f64,
}

impl TryFrom<RawNormSpec> for NormSpec {
    type Error = Error;
    fn try_from(raw: RawNormSpec) -> Result<Self> {
        NormSpec::new(raw.p)
    }
}

impl From<NormSpec> for RawNormSpec {
    fn from(s: NormSpec) -> Self {
        RawNormSpec { p: s.p, q: s.q }
    }
}

impl NormSpec {
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() || p <= 1.0 {
            return Err(Error::InvalidInput(format!(
                "norm exponent must be finite and > 1, got {p}"
            )));
        }
        Ok(Self {
            p,
            q: p / (p - 1.0),
        })
    }

    pub fn euclidean() -> Self {
        Self { p: 2.0, q: 2.0 }
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.q
    }

    /// `Some(p)` when `p` is an integer small enough for `powi`.
    #[inline]
    pub fn integer_p(&self) -> Option<i32> {
        if self.p.fract() == 0.0 && self.p <= 64.0 {
            Some(self.p as i32)
        } else {
            None
        }
    }

    #[inline]
    pub fn is_euclidean(&self) -> bool {
        self.p == 2.0
    }

    /// Whether the asymptotic normality results cover this `(p, k)` pair:
    /// any `p > 1` when `k = 2`, otherwise only integer `p >= 2`.
    ///
    /// Computation is allowed outside this domain; callers may surface a
    /// warning.
    pub fn in_theory_domain(&self, k: usize) -> bool {
        match k {
            2 => true,
            k if k >= 3 => self.integer_p().is_some_and(|p| p >= 2),
            _ => false,
        }
    }

    /// `a^(p - offset)` for `a >= 0`, with exact integer powers when `p` is an
    /// integer.
    #[inline]
    pub(crate) fn pow_offset(&self, a: f64, offset: i32) -> f64 {
        match self.integer_p() {
            Some(p) => a.powi(p - offset),
            None => a.powf(self.p - offset as f64),
        }
    }
}

/// A quantile index `u` with `||u||_q < 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Direction(Vec<f64>);

impl Direction {
    pub fn new(u: Vec<f64>, spec: &NormSpec) -> Result<Self> {
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("direction has non-finite entries".into()));
        }
        let norm = norm_with_exponent(&u, spec.q);
        if norm >= 1.0 {
            return Err(Error::Domain { norm });
        }
        Ok(Self(u))
    }

    pub fn zero(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    pub fn q_norm(&self, spec: &NormSpec) -> f64 {
        norm_with_exponent(&self.0, spec.q)
    }
}

#[inline]
pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `(sum |v_j|^e)^(1/e)`, scaled by the largest entry to avoid overflow.
pub(crate) fn norm_with_exponent(v: &[f64], e: f64) -> f64 {
    let m = v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    if e == 2.0 {
        let s: f64 = v.iter().map(|x| (x / m) * (x / m)).sum();
        return m * s.sqrt();
    }
    let s: f64 = v.iter().map(|x| (x.abs() / m).powf(e)).sum();
    m * s.powf(1.0 / e)
}

/// Unchecked `||v||_p`.
#[inline]
pub(crate) fn norm_p(v: &[f64], spec: &NormSpec) -> f64 {
    if spec.p == 2.0 {
        return norm_with_exponent(v, 2.0);
    }
    let m = v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = v.iter().map(|x| spec.pow_offset(x.abs() / m, 0)).sum();
    m * s.powf(1.0 / spec.p)
}

/// Unchecked `||v||_q` for the conjugate exponent.
#[inline]
pub(crate) fn norm_q(v: &[f64], spec: &NormSpec) -> f64 {
    norm_with_exponent(v, spec.q)
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite components")))
    }
}

fn check_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        })
    }
}

pub fn lp_norm(v: &[f64], spec: &NormSpec) -> Result<f64> {
    check_finite(v, "vector")?;
    Ok(norm_p(v, spec))
}

/// `Phi_p(u, t) = ||t||_p + <u, t>`.
pub fn phi(u: &Direction, t: &[f64], spec: &NormSpec) -> Result<f64> {
    check_same_len(u.as_slice(), t)?;
    check_finite(t, "argument")?;
    let norm = u.q_norm(spec);
    if norm >= 1.0 {
        return Err(Error::Domain { norm });
    }
    Ok(phi_unchecked(u.as_slice(), t, spec))
}

#[inline]
pub(crate) fn phi_unchecked(u: &[f64], t: &[f64], spec: &NormSpec) -> f64 {
    let inner: f64 = u.iter().zip(t).map(|(a, b)| a * b).sum();
    norm_p(t, spec) + inner
}

/// Writes the score for the displacement `d = theta - x` into `out` and
/// returns `||d||_p`. When `d = 0` the output is left untouched and `0.0` is
/// returned.
#[inline]
pub(crate) fn score_from_diff(d: &[f64], spec: &NormSpec, out: &mut [f64]) -> f64 {
    let norm = norm_p(d, spec);
    if norm == 0.0 {
        return 0.0;
    }
    for (o, &dj) in out.iter_mut().zip(d) {
        *o = spec.pow_offset(dj.abs() / norm, 1) * sign(dj);
    }
    norm
}

/// Gradient of `theta -> ||x - theta||_p`:
/// `psi_j = |x_j - theta_j|^(p-1) / ||x - theta||_p^(p-1) * sign(theta_j - x_j)`.
pub fn score_psi(x: &[f64], theta: &[f64], spec: &NormSpec) -> Result<Vec<f64>> {
    check_same_len(x, theta)?;
    check_finite(x, "observation")?;
    check_finite(theta, "evaluation point")?;
    let d: Vec<f64> = theta.iter().zip(x).map(|(t, xi)| t - xi).collect();
    let mut out = vec![0.0; d.len()];
    if score_from_diff(&d, spec, &mut out) == 0.0 {
        return Err(Error::CoincidentPoint);
    }
    Ok(out)
}

/// Score of the quantile loss: the gradient of `xi -> Phi_p(u, x - xi)`,
/// i.e. `score_psi(x, xi) - u`. Its mean vanishes at the `u`-quantile.
pub fn score_psi_u(x: &[f64], xi: &[f64], u: &Direction, spec: &NormSpec) -> Result<Vec<f64>> {
    check_same_len(x, u.as_slice())?;
    let norm = u.q_norm(spec);
    if norm >= 1.0 {
        return Err(Error::Domain { norm });
    }
    let mut s = score_psi(x, xi, spec)?;
    for (sj, uj) in s.iter_mut().zip(u.as_slice()) {
        *sj -= uj;
    }
    Ok(s)
}

/// Accumulates `scale * psi_dot` for displacement `d = theta - x` into `acc`
/// (a `k x k` column-major buffer). Fails on a coordinate tie when `p < 2`.
pub(crate) fn accumulate_psi_dot(
    d: &[f64],
    norm: f64,
    spec: &NormSpec,
    scale: f64,
    acc: &mut DMatrix<f64>,
) -> Result<()> {
    let k = d.len();
    let c = scale * (spec.p - 1.0) / norm;
    if spec.is_euclidean() {
        // (1/||d||) (I - r r^T) with r = d / ||d||
        for i in 0..k {
            let ri = d[i] / norm;
            acc[(i, i)] += c;
            for j in 0..k {
                acc[(i, j)] -= c * ri * (d[j] / norm);
            }
        }
        return Ok(());
    }
    if spec.p < 2.0 {
        if let Some(coord) = d.iter().position(|&x| x == 0.0) {
            return Err(Error::Singularity { coord, p: spec.p });
        }
    }
    let mut y = [0.0_f64; 16];
    let mut yv;
    let y: &mut [f64] = if k <= 16 {
        &mut y[..k]
    } else {
        yv = vec![0.0; k];
        &mut yv
    };
    for j in 0..k {
        let a = d[j].abs() / norm;
        y[j] = spec.pow_offset(a, 1) * sign(d[j]);
        acc[(j, j)] += c * spec.pow_offset(a, 2);
    }
    for i in 0..k {
        for j in 0..k {
            acc[(i, j)] -= c * y[i] * y[j];
        }
    }
    Ok(())
}

/// Jacobian of `theta -> score_psi(x, theta)`, i.e. the Hessian of
/// `theta -> ||x - theta||_p`. Symmetric positive semidefinite.
pub fn psi_dot(x: &[f64], theta: &[f64], spec: &NormSpec) -> Result<DMatrix<f64>> {
    check_same_len(x, theta)?;
    check_finite(x, "observation")?;
    check_finite(theta, "evaluation point")?;
    let d: Vec<f64> = theta.iter().zip(x).map(|(t, xi)| t - xi).collect();
    let norm = norm_p(&d, spec);
    if norm == 0.0 {
        return Err(Error::CoincidentPoint);
    }
    let mut m = DMatrix::zeros(d.len(), d.len());
    accumulate_psi_dot(&d, norm, spec, 1.0, &mut m)?;
    Ok(m)
}

/// `y y^T / ||x - theta||_p^(2(p-1))` with
/// `y_j = |x_j - theta_j|^(p-1) sign(x_j - theta_j)`.
pub fn sigma_integrand(x: &[f64], theta: &[f64], spec: &NormSpec) -> Result<DMatrix<f64>> {
    check_same_len(x, theta)?;
    check_finite(x, "observation")?;
    check_finite(theta, "evaluation point")?;
    let r: Vec<f64> = x.iter().zip(theta).map(|(xi, t)| xi - t).collect();
    let norm = norm_p(&r, spec);
    if norm == 0.0 {
        return Err(Error::CoincidentPoint);
    }
    let mut m = DMatrix::zeros(r.len(), r.len());
    accumulate_sigma(&r, norm, spec, 1.0, &mut m);
    Ok(m)
}

pub(crate) fn accumulate_sigma(r: &[f64], norm: f64, spec: &NormSpec, scale: f64, acc: &mut DMatrix<f64>) {
    let k = r.len();
    let y: Vec<f64> = r
        .iter()
        .map(|&rj| spec.pow_offset(rj.abs() / norm, 1) * sign(rj))
        .collect();
    for i in 0..k {
        for j in 0..k {
            acc[(i, j)] += scale * y[i] * y[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(p: f64) -> NormSpec {
        NormSpec::new(p).unwrap()
    }

    #[test]
    fn conjugate_exponent() {
        for p in [1.5, 2.0, 3.0, 4.0, 7.25] {
            let s = spec(p);
            assert!((1.0 / s.p() + 1.0 / s.q() - 1.0).abs() < 1e-15);
        }
        assert!(NormSpec::new(1.0).is_err());
        assert!(NormSpec::new(f64::INFINITY).is_err());
    }

    #[test]
    fn theory_domain_flags() {
        assert!(spec(1.5).in_theory_domain(2));
        assert!(!spec(1.5).in_theory_domain(3));
        assert!(!spec(2.5).in_theory_domain(3));
        assert!(spec(3.0).in_theory_domain(4));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(lp_norm(&[3.0, 4.0], &spec(2.0)).unwrap(), 5.0);
        assert_eq!(lp_norm(&[0.0, 0.0, 0.0], &spec(3.0)).unwrap(), 0.0);
        // 3^(1/3) to 20 digits: 1.4422495703074083823
        let v = lp_norm(&[1.0, 1.0, 1.0], &spec(3.0)).unwrap();
        assert!((v - 1.442_249_570_307_408_4).abs() < 1e-15);
        assert!(lp_norm(&[f64::NAN, 1.0], &spec(2.0)).is_err());
    }

    #[test]
    fn phi_examples() {
        let s = spec(2.0);
        assert_eq!(phi(&Direction::zero(2), &[3.0, 4.0], &s).unwrap(), 5.0);
        let u = Direction::new(vec![0.5, 0.0], &s).unwrap();
        assert_eq!(phi(&u, &[1.0, 0.0], &s).unwrap(), 1.5);
        assert_eq!(phi(&u, &[-1.0, 0.0], &s).unwrap(), 0.5);
        assert!(matches!(
            Direction::new(vec![0.8, 0.6], &s),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn score_examples() {
        let s = spec(2.0);
        assert_eq!(score_psi(&[0.0, 0.0], &[1.0, 0.0], &s).unwrap(), vec![1.0, 0.0]);
        let v = score_psi(&[1.0, 1.0], &[0.0, 0.0], &s).unwrap();
        let h = -1.0 / 2f64.sqrt();
        assert!((v[0] - h).abs() < 1e-15 && (v[1] - h).abs() < 1e-15);

        let v = score_psi(&[1.0, -2.0], &[0.0, 0.0], &spec(3.0)).unwrap();
        let c = 9f64.powf(-2.0 / 3.0);
        assert!((v[0] + c).abs() < 1e-14);
        assert!((v[1] - 4.0 * c).abs() < 1e-14);
        assert!((v[0] + 0.23112).abs() < 1e-4 && (v[1] - 0.92450).abs() < 1e-4);

        assert!(matches!(
            score_psi(&[1.0, 1.0], &[1.0, 1.0], &s),
            Err(Error::CoincidentPoint)
        ));
    }

    #[test]
    fn score_with_direction_is_loss_gradient() {
        let s = spec(2.0);
        let x = [0.0, 0.0];
        let xi = [1.0, 0.0];
        let u = Direction::new(vec![0.3, 0.0], &s).unwrap();
        let v = score_psi_u(&x, &xi, &u, &s).unwrap();
        assert!((v[0] - 0.7).abs() < 1e-15 && v[1] == 0.0);
        let u = Direction::new(vec![-0.3, 0.2], &s).unwrap();
        let v = score_psi_u(&x, &xi, &u, &s).unwrap();
        assert!((v[0] - 1.3).abs() < 1e-15 && (v[1] + 0.2).abs() < 1e-15);

        // finite-difference gradient of xi -> Phi(u, x - xi)
        let h = 1e-6;
        for j in 0..2 {
            let mut a = xi;
            let mut b = xi;
            a[j] += h;
            b[j] -= h;
            let ta: Vec<f64> = x.iter().zip(&a).map(|(p, q)| p - q).collect();
            let tb: Vec<f64> = x.iter().zip(&b).map(|(p, q)| p - q).collect();
            let fd = (phi(&u, &ta, &s).unwrap() - phi(&u, &tb, &s).unwrap()) / (2.0 * h);
            assert!((fd - v[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn psi_dot_examples() {
        let s = spec(2.0);
        let m = psi_dot(&[2.0, 0.0], &[0.0, 0.0], &s).unwrap();
        assert_eq!(m[(0, 0)], 0.0);
        assert_eq!(m[(0, 1)], 0.0);
        assert_eq!(m[(1, 0)], 0.0);
        assert_eq!(m[(1, 1)], 0.5);

        let r = [0.6, 0.8];
        let m = psi_dot(&r, &[0.0, 0.0], &s).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 } - r[i] * r[j];
                assert!((m[(i, j)] - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn psi_dot_singular_for_small_p_ties() {
        let s = spec(1.5);
        assert!(matches!(
            psi_dot(&[1.0, 0.0], &[0.0, 0.0], &s),
            Err(Error::Singularity { coord: 1, .. })
        ));
        // p > 2 handles the tie fine
        assert!(psi_dot(&[1.0, 0.0], &[0.0, 0.0], &spec(3.0)).is_ok());
    }

    #[test]
    fn sigma_examples() {
        let s = spec(2.0);
        let m = sigma_integrand(&[2.0, 0.0], &[0.0, 0.0], &s).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn sign_of_zero() {
        // coordinate ties contribute a zero score component
        let v = score_psi(&[1.0, 0.0], &[0.0, 0.0], &spec(3.0)).unwrap();
        assert_eq!(v[1], 0.0);
    }

    fn point(k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0..5.0f64, k)
    }

    proptest! {
        #[test]
        fn score_has_unit_dual_norm(x in point(3), t in point(3), p in prop::sample::select(vec![1.5, 2.0, 3.0, 4.0, 5.5])) {
            let s = spec(p);
            prop_assume!(norm_p(&x.iter().zip(&t).map(|(a, b)| a - b).collect::<Vec<_>>(), &s) > 1e-6);
            let v = score_psi(&x, &t, &s).unwrap();
            prop_assert!((norm_q(&v, &s) - 1.0).abs() < 1e-10);
            prop_assert!(v.iter().all(|c| c.abs() <= 1.0 + 1e-15));
        }

        #[test]
        fn phi_positivity_margin(t in point(3), u in point(3), p in prop::sample::select(vec![1.5, 2.0, 3.0])) {
            let s = spec(p);
            let scale = 0.9 / norm_q(&u, &s).max(1e-9);
            let u: Vec<f64> = u.iter().map(|x| x * scale.min(1.0)).collect();
            let d = Direction::new(u, &s).unwrap();
            let lower = (1.0 - d.q_norm(&s)) * norm_p(&t, &s);
            prop_assert!(phi(&d, &t, &s).unwrap() >= lower - 1e-12);
        }

        #[test]
        fn zero_direction_is_bitwise_score(x in point(2), t in point(2)) {
            let s = spec(3.0);
            prop_assume!(x != t);
            let a = score_psi(&x, &t, &s).unwrap();
            let b = score_psi_u(&x, &t, &Direction::zero(2), &s).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn sigma_is_score_outer_product(x in point(4), t in point(4), p in prop::sample::select(vec![2.0, 3.0, 4.0])) {
            let s = spec(p);
            prop_assume!(x != t);
            let v = score_psi(&x, &t, &s).unwrap();
            let m = sigma_integrand(&x, &t, &s).unwrap();
            let tr: f64 = (0..4).map(|i| m[(i, i)]).sum();
            prop_assert!(tr > 0.0 && tr <= 4.0 + 1e-12);
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert!((m[(i, j)] - v[i] * v[j]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn psi_dot_is_symmetric_psd(x in point(3), t in point(3), p in prop::sample::select(vec![2.0, 3.0, 4.0])) {
            let s = spec(p);
            prop_assume!(x != t);
            let m = psi_dot(&x, &t, &s).unwrap();
            prop_assert!((&m - m.transpose()).abs().max() < 1e-12);
            let ev = nalgebra::SymmetricEigen::new(m).eigenvalues;
            prop_assert!(ev.iter().all(|&l| l >= -1e-10));
        }
    }
}
