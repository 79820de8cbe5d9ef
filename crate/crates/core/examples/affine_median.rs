//! Transformation-retransformation median: equivariance under an affine map
//! of the data, compared with the plain spatial median.

use geomed::affine::{select_alpha, tr_median, AlphaSubset};
use geomed::simstudy::{gen_data, DataDistribution};
use geomed::solver::{weighted_median, SolverOptions};
use geomed::{NormSpec, RngSeed, WeightVector};
use nalgebra::DMatrix;

fn main() -> geomed::Result<()> {
    let data = gen_data(DataDistribution::Normal, 120, 2, RngSeed::new(17))?;
    let spec = NormSpec::euclidean();
    let opts = SolverOptions::default();
    let alpha = select_alpha(&data, 500, RngSeed::new(2))?;
    println!("subset {:?}, criterion {:.4}", alpha.indices, alpha.criterion);
    let theta = tr_median(&data, &alpha, &spec, &opts)?;

    let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, -0.5, 0.2]);
    let b = [10.0, -4.0];
    let mapped = data.affine_map(&a, &b)?;
    let mapped_alpha = AlphaSubset::from_indices(&mapped, &alpha.indices)?;
    let theta_mapped = tr_median(&mapped, &mapped_alpha, &spec, &opts)?;
    let expect = [
        a[(0, 0)] * theta[0] + a[(0, 1)] * theta[1] + b[0],
        a[(1, 0)] * theta[0] + a[(1, 1)] * theta[1] + b[1],
    ];
    println!("TR median {theta:?}");
    println!("after the map {theta_mapped:?}, expected {expect:?}");

    let w = WeightVector::uniform(data.n());
    let plain = weighted_median(&data, &w, &spec, &opts)?.minimizer;
    let plain_mapped = weighted_median(&mapped, &w, &spec, &opts)?.minimizer;
    let plain_expect = [
        a[(0, 0)] * plain[0] + a[(0, 1)] * plain[1] + b[0],
        a[(1, 0)] * plain[0] + a[(1, 1)] * plain[1] + b[1],
    ];
    println!("spatial median after the map {plain_mapped:?}, image of the original {plain_expect:?}");
    Ok(())
}
