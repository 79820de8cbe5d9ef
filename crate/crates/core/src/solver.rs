//! Weighted lp-medians and geometric quantiles.
//!
//! The objective `f(xi) = sum_i w_i Phi_p(u, X_i - xi)` is convex and smooth
//! away from the data points. Each iteration takes a damped Newton step with
//! an Armijo backtracking line search. When the Newton direction is not
//! usable the solver falls back to a Weiszfeld step (`p = 2`) or a scaled
//! steepest-descent step in the dual norm (general `p`). An iterate that lands
//! on a data point is handled with the Vardi-Zhang rule: the point is kept if
//! the subgradient certificate `||g||_q <= w_coincident` holds, otherwise the
//! iterate is pushed off it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, WeightVector};
use crate::error::{Error, Result};
use crate::lp_core::{accumulate_psi_dot, norm_p, norm_q, score_from_diff, sign, Direction, NormSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop when the minimal subgradient has q-norm below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative objective change treated as stagnation.
    pub rel_obj_tol: f64,
    /// Rows closer than this (scaled by `1 + ||xi||_inf`) count as coincident.
    pub coincidence_tol: f64,
    pub armijo_c: f64,
    /// Hessians with a larger condition number are not inverted.
    pub max_condition: f64,
    /// Take Newton steps; when false only the fallback steps are used.
    pub newton: bool,
    /// Starting point; defaults to the coordinatewise weighted quantile.
    pub init: Option<Vec<f64>>,
    /// Skip the collinearity check (callers that validated the data once).
    pub skip_geometry_check: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            rel_obj_tol: 1e-12,
            coincidence_tol: 1e-12,
            armijo_c: 1e-4,
            max_condition: 1e12,
            newton: true,
            init: None,
            skip_geometry_check: false,
        }
    }
}

impl SolverOptions {
    pub fn with_init(mut self, init: Vec<f64>) -> Self {
        self.init = Some(init);
        self
    }

    /// Options for a second attempt after a failed solve: first-order steps
    /// only, from the default start, with a larger iteration budget.
    pub fn damped(&self) -> Self {
        Self {
            newton: false,
            init: None,
            max_iter: self.max_iter * 4,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub minimizer: Vec<f64>,
    pub objective: f64,
    /// q-norm of the minimal-norm subgradient at the minimizer.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the minimizer is a data point.
    pub coincident_row: Option<usize>,
}

/// `sum_i w_i Phi_p(u, X_i - xi)`.
pub fn objective(
    data: &DataMatrix,
    w: &WeightVector,
    u: &Direction,
    xi: &[f64],
    spec: &NormSpec,
) -> Result<f64> {
    check_shapes(data, w, u)?;
    if xi.len() != data.k() {
        return Err(Error::DimensionMismatch {
            expected: data.k(),
            got: xi.len(),
        });
    }
    if xi.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("evaluation point has non-finite entries".into()));
    }
    let prob = Problem::new(data, w.as_slice(), u.as_slice(), spec);
    Ok(prob.objective(xi))
}

/// Weighted lp-median: the minimizer of `sum_i w_i ||X_i - theta||_p`.
pub fn weighted_median(
    data: &DataMatrix,
    w: &WeightVector,
    spec: &NormSpec,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    geometric_quantile(data, w, &Direction::zero(data.k()), spec, opts)
}

/// Geometric `u`-quantile: the minimizer of `sum_i w_i Phi_p(u, X_i - xi)`.
pub fn geometric_quantile(
    data: &DataMatrix,
    w: &WeightVector,
    u: &Direction,
    spec: &NormSpec,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    check_shapes(data, w, u)?;
    let norm = u.q_norm(spec);
    if norm >= 1.0 {
        return Err(Error::Domain { norm });
    }
    let report = solve_unchecked(data, w.as_slice(), u.as_slice(), spec, opts)?;
    if report.converged {
        Ok(report)
    } else {
        Err(Error::NonConvergence {
            best: report.minimizer,
            iterations: report.iterations,
            gradient_norm: report.gradient_norm,
        })
    }
}

fn check_shapes(data: &DataMatrix, w: &WeightVector, u: &Direction) -> Result<()> {
    if w.len() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            got: w.len(),
        });
    }
    if u.k() != data.k() {
        return Err(Error::DimensionMismatch {
            expected: data.k(),
            got: u.k(),
        });
    }
    Ok(())
}

/// Runs the solver without the converged/error translation. `u` must lie in
/// the open q-ball and `w` must match the data.
pub(crate) fn solve_unchecked(
    data: &DataMatrix,
    w: &[f64],
    u: &[f64],
    spec: &NormSpec,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let prob = Problem::new(data, w, u, spec);
    if data.n() == 1 || data.all_rows_equal() {
        let x = data.row(0).to_vec();
        return Ok(prob.report_at_row(0, x, 0));
    }
    if data.k() == 1 {
        return Ok(prob.solve_univariate());
    }
    if !opts.skip_geometry_check && data.centered_rank() < 2 {
        return Err(Error::DegenerateGeometry(
            "observations lie on a single straight line".into(),
        ));
    }
    if let Some(init) = &opts.init {
        if init.len() != data.k() || init.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("invalid initial point".into()));
        }
    }
    let init = opts
        .init
        .clone()
        .unwrap_or_else(|| coordinatewise_quantile(data, w, u));
    Ok(prob.iterate(init, opts))
}

/// Coordinatewise weighted quantile at levels `(1 + u_j) / 2`; for `u = 0`
/// the coordinatewise weighted median.
pub fn coordinatewise_quantile(data: &DataMatrix, w: &[f64], u: &[f64]) -> Vec<f64> {
    (0..data.k())
        .map(|j| {
            let col = data.column(j);
            weighted_quantile_1d(&col, w, 0.5 * (1.0 + u[j])).1
        })
        .collect()
}

/// Smallest value `x` with cumulative weight `F(x) >= level * W`. Returns the
/// row index and the value.
fn weighted_quantile_1d(values: &[f64], w: &[f64], level: f64) -> (usize, f64) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let total: f64 = w.iter().sum();
    let target = level * total;
    let slack = 1e-12 * total;
    let mut cum = 0.0;
    for &i in &idx {
        cum += w[i];
        if cum >= target - slack && w[i] > 0.0 {
            return (i, values[i]);
        }
    }
    let last = *idx.last().expect("non-empty");
    (last, values[last])
}

struct Problem<'a> {
    data: &'a DataMatrix,
    w: &'a [f64],
    u: &'a [f64],
    spec: &'a NormSpec,
    wsum: f64,
}

struct Evaluation {
    f: f64,
    /// Gradient of the smooth part (coincident rows excluded).
    grad: Vec<f64>,
    /// Total weight of rows coincident with the iterate.
    eta: f64,
    coincident: Option<usize>,
    nearest: usize,
    nearest_dist: f64,
    mean_dist: f64,
    hessian: Option<DMatrix<f64>>,
    /// Weiszfeld numerator `sum w X / d + u W` and denominator `sum w / d`.
    wz_num: Vec<f64>,
    wz_den: f64,
}

impl Evaluation {
    fn gradient_norm(&self, spec: &NormSpec) -> f64 {
        let g = norm_q(&self.grad, spec);
        if self.eta > 0.0 {
            (g - self.eta).max(0.0)
        } else {
            g
        }
    }
}

enum Step {
    Accepted(Vec<f64>),
    Failed,
}

impl<'a> Problem<'a> {
    fn new(data: &'a DataMatrix, w: &'a [f64], u: &'a [f64], spec: &'a NormSpec) -> Self {
        Self {
            data,
            w,
            u,
            spec,
            wsum: w.iter().sum(),
        }
    }

    fn objective(&self, xi: &[f64]) -> f64 {
        let k = self.data.k();
        let mut t = vec![0.0; k];
        let mut f = 0.0;
        for (x, &wi) in self.data.rows().zip(self.w) {
            if wi == 0.0 {
                continue;
            }
            for j in 0..k {
                t[j] = x[j] - xi[j];
            }
            let inner: f64 = self.u.iter().zip(&t).map(|(a, b)| a * b).sum();
            f += wi * (norm_p(&t, self.spec) + inner);
        }
        f
    }

    fn coincidence_radius(&self, xi: &[f64], opts: &SolverOptions) -> f64 {
        opts.coincidence_tol * (1.0 + xi.iter().fold(0.0_f64, |a, x| a.max(x.abs())))
    }

    fn evaluate(&self, xi: &[f64], want_hessian: bool, radius: f64) -> Evaluation {
        let k = self.data.k();
        let spec = self.spec;
        let mut d = vec![0.0; k];
        let mut s = vec![0.0; k];
        let mut grad = vec![0.0; k];
        let mut wz_num = vec![0.0; k];
        let mut wz_den = 0.0;
        let mut f = 0.0;
        let mut eta = 0.0;
        let mut coincident = None;
        let mut nearest = 0;
        let mut nearest_dist = f64::INFINITY;
        let mut mean_dist = 0.0;
        let mut hessian = want_hessian.then(|| DMatrix::<f64>::zeros(k, k));
        let mut hess_ok = true;
        for (i, (x, &wi)) in self.data.rows().zip(self.w).enumerate() {
            if wi == 0.0 {
                continue;
            }
            for j in 0..k {
                d[j] = xi[j] - x[j];
            }
            let norm = norm_p(&d, spec);
            let inner: f64 = self.u.iter().zip(&d).map(|(a, b)| a * b).sum();
            f += wi * (norm - inner);
            mean_dist += wi * norm;
            if norm < nearest_dist {
                nearest_dist = norm;
                nearest = i;
            }
            if norm <= radius {
                eta += wi;
                coincident.get_or_insert(i);
                continue;
            }
            score_from_diff(&d, spec, &mut s);
            for j in 0..k {
                grad[j] += wi * s[j];
            }
            if spec.is_euclidean() {
                let c = wi / norm;
                wz_den += c;
                for j in 0..k {
                    wz_num[j] += c * x[j];
                }
            }
            if let (Some(h), true) = (hessian.as_mut(), hess_ok) {
                hess_ok = accumulate_psi_dot(&d, norm, spec, wi, h).is_ok();
            }
        }
        for j in 0..k {
            grad[j] -= self.u[j] * self.wsum;
            wz_num[j] += self.u[j] * self.wsum;
        }
        Evaluation {
            f,
            grad,
            eta,
            coincident,
            nearest,
            nearest_dist,
            mean_dist: mean_dist / self.wsum,
            hessian: if hess_ok { hessian } else { None },
            wz_num,
            wz_den,
        }
    }

    fn report_at_row(&self, row: usize, x: Vec<f64>, iterations: usize) -> SolveReport {
        let radius = 0.0;
        let ev = self.evaluate(&x, false, radius);
        let g = ev.gradient_norm(self.spec);
        SolveReport {
            objective: ev.f,
            gradient_norm: g,
            iterations,
            converged: true,
            coincident_row: Some(ev.coincident.unwrap_or(row)),
            minimizer: x,
        }
    }

    /// `k = 1`: the loss is piecewise linear and the minimizer is the
    /// weighted `(1 + u) / 2` quantile of the observations.
    fn solve_univariate(&self) -> SolveReport {
        let col = self.data.column(0);
        let (row, value) = weighted_quantile_1d(&col, self.w, 0.5 * (1.0 + self.u[0]));
        let x = vec![value];
        let ev = self.evaluate(&x, false, 0.0);
        let g = ev.gradient_norm(self.spec);
        SolveReport {
            objective: ev.f,
            gradient_norm: g,
            iterations: 0,
            converged: g <= 1e-10,
            coincident_row: Some(row),
            minimizer: x,
        }
    }

    /// Checks the subgradient certificate at data row `row`.
    fn certify_row(&self, row: usize, radius_scale: &SolverOptions, tol: f64) -> Option<SolveReport> {
        let x = self.data.row(row).to_vec();
        let radius = self.coincidence_radius(&x, radius_scale);
        let ev = self.evaluate(&x, false, radius);
        let g = ev.gradient_norm(self.spec);
        (g <= tol).then_some(SolveReport {
            objective: ev.f,
            gradient_norm: g,
            iterations: 0,
            converged: true,
            coincident_row: Some(row),
            minimizer: x,
        })
    }

    fn iterate(&self, mut xi: Vec<f64>, opts: &SolverOptions) -> SolveReport {
        let spec = self.spec;
        let mut best: Option<(Vec<f64>, f64, f64)> = None;
        let mut stagnant = 0usize;
        let mut last_f = f64::INFINITY;
        let mut certified_at: Option<usize> = None;
        for it in 0..opts.max_iter {
            let radius = self.coincidence_radius(&xi, opts);
            let ev = self.evaluate(&xi, opts.newton, radius);
            let gnorm = ev.gradient_norm(spec);
            if best.as_ref().is_none_or(|b| gnorm < b.2) {
                best = Some((xi.clone(), ev.f, gnorm));
            }
            if gnorm <= opts.tol {
                return SolveReport {
                    minimizer: xi,
                    objective: ev.f,
                    gradient_norm: gnorm,
                    iterations: it,
                    converged: true,
                    coincident_row: ev.coincident,
                };
            }
            if (last_f - ev.f).abs() <= opts.rel_obj_tol * ev.f.abs() {
                stagnant += 1;
                if stagnant >= 5 {
                    break;
                }
            } else {
                stagnant = 0;
            }
            last_f = ev.f;

            // Close to a data point: test whether that point is the answer,
            // otherwise leave it along its steepest-descent direction.
            let near = ev.eta == 0.0 && ev.nearest_dist <= 1e-3 * ev.mean_dist;
            if near && certified_at != Some(ev.nearest) {
                certified_at = Some(ev.nearest);
                if let Some(mut r) = self.certify_row(ev.nearest, opts, opts.tol) {
                    r.iterations = it + 1;
                    return r;
                }
                let x = self.data.row(ev.nearest).to_vec();
                let at = self.evaluate(&x, false, self.coincidence_radius(&x, opts));
                if at.eta > 0.0 {
                    if let Step::Accepted(next) = self.leave_data_point(&x, &at) {
                        if self.objective(&next) < ev.f {
                            xi = next;
                            continue;
                        }
                    }
                }
            }

            let step = if ev.eta > 0.0 {
                self.leave_data_point(&xi, &ev)
            } else {
                let newton = if opts.newton {
                    self.newton_step(&xi, &ev, gnorm, opts, radius)
                } else {
                    Step::Failed
                };
                match newton {
                    Step::Accepted(x) => Step::Accepted(x),
                    Step::Failed => self.fallback_step(&xi, &ev, opts),
                }
            };
            match step {
                Step::Accepted(x) => xi = x,
                Step::Failed => {
                    if let Some(mut r) = self.certify_row(ev.nearest, opts, opts.tol) {
                        r.iterations = it + 1;
                        return r;
                    }
                    break;
                }
            }
        }
        let radius = self.coincidence_radius(&xi, opts);
        let ev = self.evaluate(&xi, false, radius);
        let gnorm = ev.gradient_norm(spec);
        let (x, f, g, coincident) = match best {
            Some((bx, bf, bg)) if bg < gnorm => {
                let r = self.coincidence_radius(&bx, opts);
                let c = self.evaluate(&bx, false, r).coincident;
                (bx, bf, bg, c)
            }
            _ => (xi, ev.f, gnorm, ev.coincident),
        };
        SolveReport {
            minimizer: x,
            objective: f,
            gradient_norm: g,
            iterations: opts.max_iter,
            converged: g <= opts.tol,
            coincident_row: coincident,
        }
    }

    fn newton_step(
        &self,
        xi: &[f64],
        ev: &Evaluation,
        gnorm: f64,
        opts: &SolverOptions,
        radius: f64,
    ) -> Step {
        let Some(h) = ev.hessian.as_ref() else {
            return Step::Failed;
        };
        let eig = SymmetricEigen::new(h.clone());
        let lmax = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(lmin > 0.0) || lmax / lmin > opts.max_condition {
            return Step::Failed;
        }
        let g = DVector::from_column_slice(&ev.grad);
        let Some(chol) = h.clone().cholesky() else {
            return Step::Failed;
        };
        let dir: Vec<f64> = (-chol.solve(&g)).iter().cloned().collect();
        let slope: f64 = dir.iter().zip(&ev.grad).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            return Step::Failed;
        }
        let mut t = 1.0;
        for _ in 0..60 {
            let trial: Vec<f64> = xi.iter().zip(&dir).map(|(x, d)| x + t * d).collect();
            let ft = self.objective(&trial);
            if ft <= ev.f + opts.armijo_c * t * slope {
                return Step::Accepted(trial);
            }
            // The decrease is below what f64 can resolve: judge by the gradient.
            if t == 1.0 && (ft - ev.f).abs() <= 1e-14 * ev.f.abs().max(f64::MIN_POSITIVE) {
                let et = self.evaluate(&trial, false, radius);
                if et.eta == 0.0 && et.gradient_norm(self.spec) < gnorm {
                    return Step::Accepted(trial);
                }
            }
            t *= 0.5;
        }
        Step::Failed
    }

    /// Weiszfeld step for `p = 2`; otherwise a backtracking step along the
    /// steepest-descent direction of the dual norm.
    fn fallback_step(&self, xi: &[f64], ev: &Evaluation, opts: &SolverOptions) -> Step {
        if self.spec.is_euclidean() && ev.wz_den > 0.0 {
            let t: Vec<f64> = ev.wz_num.iter().map(|v| v / ev.wz_den).collect();
            if t.iter().all(|v| v.is_finite()) && t != xi {
                return Step::Accepted(t);
            }
            return Step::Failed;
        }
        let dir = self.dual_direction(&ev.grad);
        // curvature scale: sum w (p - 1) / ||X_i - xi||
        let curvature = (self.spec.p() - 1.0) * ev.mean_dist.recip().max(1e-300);
        let scale = 1.0 / curvature.max(1e-300);
        let slope: f64 = dir.iter().zip(&ev.grad).map(|(a, b)| a * b).sum::<f64>() * scale;
        if !(slope < 0.0) {
            return Step::Failed;
        }
        let mut t = 1.0;
        for _ in 0..80 {
            let trial: Vec<f64> = xi.iter().zip(&dir).map(|(x, d)| x + t * scale * d).collect();
            let ft = self.objective(&trial);
            if ft <= ev.f + opts.armijo_c * t * slope {
                return Step::Accepted(trial);
            }
            t *= 0.5;
        }
        Step::Failed
    }

    /// `-J(g)`, the direction maximizing the decrease per unit p-norm.
    fn dual_direction(&self, g: &[f64]) -> Vec<f64> {
        let q = self.spec.q();
        let m = g.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        if m == 0.0 {
            return vec![0.0; g.len()];
        }
        g.iter()
            .map(|&gj| -sign(gj) * m * (gj.abs() / m).powf(q - 1.0))
            .collect()
    }

    /// The iterate sits on a data point that is not optimal.
    fn leave_data_point(&self, xi: &[f64], ev: &Evaluation) -> Step {
        let r = norm_q(&ev.grad, self.spec);
        if self.spec.is_euclidean() && ev.wz_den > 0.0 {
            // Vardi-Zhang: (1 - eta/r) T(y) + (eta/r) y
            let lam = (ev.eta / r).min(1.0);
            let next: Vec<f64> = ev
                .wz_num
                .iter()
                .zip(xi)
                .map(|(num, y)| (1.0 - lam) * (num / ev.wz_den) + lam * y)
                .collect();
            return Step::Accepted(next);
        }
        // Directional derivative along d = -J(g): ||g||^(q-1) (eta - ||g||) < 0.
        let dir = self.dual_direction(&ev.grad);
        let dnorm = norm_p(&dir, self.spec);
        let slope = -r * dnorm + ev.eta * dnorm;
        let scale = ev.mean_dist.max(1e-300) / dnorm.max(1e-300);
        let mut t = 1.0;
        for _ in 0..100 {
            let trial: Vec<f64> = xi.iter().zip(&dir).map(|(x, d)| x + t * scale * d).collect();
            let ft = self.objective(&trial);
            if ft <= ev.f + 1e-4 * t * scale * slope {
                return Step::Accepted(trial);
            }
            t *= 0.5;
        }
        Step::Failed
    }
}
