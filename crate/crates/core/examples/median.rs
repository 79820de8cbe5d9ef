//! Spatial median and l3-median of a small bivariate sample, with a weighted
//! variant where one observation dominates.

use geomed::solver::{weighted_median, SolverOptions};
use geomed::{DataMatrix, NormSpec, WeightVector};

fn main() -> geomed::Result<()> {
    let data = DataMatrix::from_rows(&[
        [0.0, 0.0],
        [4.0, 0.5],
        [1.0, 3.0],
        [-1.5, 1.0],
        [2.5, 2.5],
        [0.5, -2.0],
    ])?;
    let opts = SolverOptions::default();
    let uniform = WeightVector::uniform(data.n());
    for p in [2.0, 3.0, 1.5] {
        let r = weighted_median(&data, &uniform, &NormSpec::new(p)?, &opts)?;
        println!(
            "p = {p}: median ({:.6}, {:.6}), objective {:.6}, {} iterations",
            r.minimizer[0], r.minimizer[1], r.objective, r.iterations
        );
    }
    let heavy = WeightVector::new(vec![0.6, 0.08, 0.08, 0.08, 0.08, 0.08])?;
    let r = weighted_median(&data, &heavy, &NormSpec::euclidean(), &opts)?;
    println!("weighted: {:?}, data point {:?}", r.minimizer, r.coincident_row);
    Ok(())
}
