use geomed::bootstrap::dirichlet_weights;
use geomed::lp_core::{lp_norm, score_psi, Direction};
use geomed::solver::{objective, weighted_median, SolverOptions};
use geomed::{DataMatrix, NormSpec, RngSeed, WeightVector};
use nalgebra::DMatrix;
use rand::Rng;

/// Finite-difference step relative to the smallest coordinate gap.
pub const FD_STEP: f64 = 1e-3;

/// Grid search: a coarse grid over a window that grows until the best point
/// is interior, then grids of step 1e-3 and 1e-5 around the incumbent.
pub fn grid_minimizer(data: &DataMatrix, w: &WeightVector, u: &Direction, spec: &NormSpec) -> Vec<f64> {
    let f = |x: f64, y: f64| objective(data, w, u, &[x, y], spec).unwrap();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for r in data.rows() {
        for j in 0..2 {
            lo[j] = lo[j].min(r[j]);
            hi[j] = hi[j].max(r[j]);
        }
    }
    let mut center = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let mut half = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-3);
    let search = |c: [f64; 2], half: f64, steps: i32| {
        let h = half / steps as f64;
        let mut best = (f64::INFINITY, c, 0, 0);
        for i in -steps..=steps {
            for j in -steps..=steps {
                let (x, y) = (c[0] + i as f64 * h, c[1] + j as f64 * h);
                let v = f(x, y);
                if v < best.0 {
                    best = (v, [x, y], i, j);
                }
            }
        }
        best
    };
    loop {
        let (_, b, i, j) = search(center, half, 100);
        if i.abs() < 100 && j.abs() < 100 {
            center = b;
            break;
        }
        center = b;
        half *= 2.0;
    }
    let h = half / 100.0;
    let (_, b, ..) = search(center, 2.0 * h, (2.0 * h / 1e-3).ceil() as i32);
    let (_, b, ..) = search(b, 2e-3, 200);
    b.to_vec()
}

/// A small weighted instance with `n` in 3..=7, `k = 2` and a direction of
/// q-norm below 0.6.
pub fn oracle_instance(seed: u64) -> (DataMatrix, WeightVector, Vec<f64>) {
    let mut rng = RngSeed::new(seed).rng();
    let n = rng.random_range(3..=7);
    let data = super::normal_data(n, 2, seed.wrapping_mul(31));
    let w = if seed.is_multiple_of(2) {
        WeightVector::uniform(n)
    } else {
        dirichlet_weights(n, RngSeed::new(seed).derive(7)).unwrap()
    };
    let r = rng.random_range(0.0..0.6);
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    (data, w, vec![r * a.cos(), r * a.sin()])
}

/// Step for the five-point stencil, kept well inside the region where every
/// coordinate of `x - theta` keeps its sign.
pub fn fd_step(x: &[f64], theta: &[f64]) -> f64 {
    FD_STEP * x.iter().zip(theta).map(|(a, b)| (a - b).abs()).fold(f64::INFINITY, f64::min)
}

fn five_point<F: Fn(&[f64]) -> Vec<f64>>(f: F, theta: &[f64], c: usize, h: f64) -> Vec<f64> {
    let at = |s: f64| {
        let mut t = theta.to_vec();
        t[c] += s * h;
        f(&t)
    };
    let (p2, p1, m1, m2) = (at(2.0), at(1.0), at(-1.0), at(-2.0));
    (0..p1.len()).map(|r| (m2[r] - 8.0 * m1[r] + 8.0 * p1[r] - p2[r]) / (12.0 * h)).collect()
}

pub fn fd_gradient(x: &[f64], theta: &[f64], spec: &NormSpec) -> Vec<f64> {
    let f = |t: &[f64]| {
        let d: Vec<f64> = x.iter().zip(t).map(|(a, b)| a - b).collect();
        vec![lp_norm(&d, spec).unwrap()]
    };
    let h = fd_step(x, theta);
    (0..theta.len()).map(|c| five_point(f, theta, c, h)[0]).collect()
}

pub fn fd_jacobian(x: &[f64], theta: &[f64], spec: &NormSpec) -> DMatrix<f64> {
    let k = theta.len();
    let h = fd_step(x, theta);
    let mut j = DMatrix::zeros(k, k);
    for c in 0..k {
        let col = five_point(|t: &[f64]| score_psi(x, t, spec).unwrap(), theta, c, h);
        for r in 0..k {
            j[(r, c)] = col[r];
        }
    }
    j
}

pub fn median(data: &DataMatrix, p: f64) -> Vec<f64> {
    weighted_median(data, &WeightVector::uniform(data.n()), &NormSpec::new(p).unwrap(), &SolverOptions::default())
        .unwrap()
        .minimizer
}

pub fn random_affine(seed: u64) -> (DMatrix<f64>, Vec<f64>) {
    let g = super::normal_data(4, 2, seed);
    let a = DMatrix::from_row_slice(2, 2, &g.values()[..4]) + DMatrix::identity(2, 2) * 2.0;
    (a, g.values()[4..6].iter().map(|x| 5.0 * x).collect())
}

