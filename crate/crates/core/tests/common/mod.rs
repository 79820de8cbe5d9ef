#![allow(dead_code)]

pub mod fixtures;
pub mod oracle;

use geomed::{DataMatrix, RngSeed};
use nalgebra::DMatrix;
use proptest::test_runner::{Config, RngSeed as PropSeed};
use rand::Rng;
use rand_distr::StandardNormal;

/// Property-test settings with a fixed seed and no failure files.
pub fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: PropSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..Config::default()
    }
}

pub fn frobenius_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

pub fn normal_data(n: usize, k: usize, seed: u64) -> DataMatrix {
    let mut rng = RngSeed::new(seed).rng();
    let v = (0..n * k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    DataMatrix::new(n, k, v).unwrap()
}

pub fn random_orthogonal(k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = RngSeed::new(seed).rng();
    let m = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    m.qr().q()
}

pub fn apply(a: &DMatrix<f64>, x: &[f64], b: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| b[i] + (0..x.len()).map(|j| a[(i, j)] * x[j]).sum::<f64>())
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
