mod common;

use geomed::asymptotics::{quantile_sandwich, sandwich, sandwich_with, CoincidencePolicy};
use geomed::lp_core::Direction;
use geomed::solver::{geometric_quantile, weighted_median, SolverOptions};
use geomed::{DataMatrix, NormSpec, WeightVector};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn median(data: &DataMatrix, spec: &NormSpec) -> Vec<f64> {
    weighted_median(data, &WeightVector::uniform(data.n()), spec, &SolverOptions::default())
        .unwrap()
        .minimizer
}

fn min_eigen(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

proptest! {
    #![proptest_config(common::config(30))]

    #[test]
    fn covariance_is_symmetric_psd(seed in 0u64..1000, p in prop::sample::select(vec![2.0, 3.0, 4.0]), k in 2usize..=4) {
        let data = common::normal_data(40, k, seed);
        let spec = NormSpec::new(p).unwrap();
        let s = sandwich(&data, &median(&data, &spec), &spec).unwrap();
        for m in [&s.cov, &s.sigma_hat, &s.psi_dot_hat] {
            prop_assert!((m - m.transpose()).norm() <= 1e-12 * m.norm());
            prop_assert!(min_eigen(m) >= -1e-8 * m.trace());
        }
    }

    #[test]
    fn euclidean_sandwich_matches_projector_form(seed in 0u64..1000, k in 2usize..=4) {
        let data = common::normal_data(30, k, seed);
        let spec = NormSpec::euclidean();
        let theta = median(&data, &spec);
        let s = sandwich(&data, &theta, &spec).unwrap();
        let mut h = DMatrix::<f64>::zeros(k, k);
        let mut sig = DMatrix::<f64>::zeros(k, k);
        for x in data.rows() {
            let r = nalgebra::DVector::from_iterator(k, x.iter().zip(&theta).map(|(a, b)| a - b));
            let d = r.norm();
            let e = &r / d;
            h += (DMatrix::identity(k, k) - &e * e.transpose()) / d;
            sig += &e * e.transpose();
        }
        h /= data.n() as f64;
        sig /= data.n() as f64;
        let hi = h.clone().try_inverse().unwrap();
        let cov = &hi * &sig * &hi;
        prop_assert!((&s.cov - &cov).norm() <= 1e-12 * cov.norm());
    }
}

#[test]
fn coincidence_conventions_agree() {
    let mut rows: Vec<Vec<f64>> = common::normal_data(51, 2, 3).rows().map(|r| r.to_vec()).collect();
    let spec = NormSpec::euclidean();
    let theta = median(&DataMatrix::from_rows(&rows).unwrap(), &spec);
    rows.push(theta.clone());
    let data = DataMatrix::from_rows(&rows).unwrap();
    let ex = sandwich_with(&data, &theta, &spec, CoincidencePolicy::Exclude).unwrap();
    let zs = sandwich_with(&data, &theta, &spec, CoincidencePolicy::ZeroScore).unwrap();
    assert_eq!(ex.n_used, 51);
    assert!(common::frobenius_rel(&zs.cov, &ex.cov) <= 5.0 / ex.n_used as f64);
}

#[test]
fn joint_quantile_covariance_matches_replications() {
    let (n, reps) = (500, 400);
    let spec = NormSpec::euclidean();
    let dirs = [Direction::zero(2), Direction::new(vec![0.3, 0.0], &spec).unwrap()];
    let opts = SolverOptions::default();
    let w = WeightVector::uniform(n);
    let mut est = Vec::with_capacity(reps);
    for r in 0..reps as u64 {
        let data = common::normal_data(n, 2, 10_000 + r);
        let mut row = Vec::with_capacity(4);
        for u in &dirs {
            row.extend(geometric_quantile(&data, &w, u, &spec, &opts).unwrap().minimizer);
        }
        est.push(row);
    }
    let est = DataMatrix::from_rows(&est).unwrap();
    let mc = est.sample_covariance().unwrap() * n as f64;

    let big = common::normal_data(100_000, 2, 99);
    let wb = WeightVector::uniform(big.n());
    let centers: Vec<Vec<f64>> =
        dirs.iter().map(|u| geometric_quantile(&big, &wb, u, &spec, &opts).unwrap().minimizer).collect();
    let full = quantile_sandwich(&big, &centers, &dirs, &spec).unwrap().full();
    let err = common::frobenius_rel(&mc, &full);
    assert!(err < 0.2, "relative error {err}\n{mc}\n{full}");
    assert!(min_eigen(&full) >= -1e-8 * full.trace());
}
