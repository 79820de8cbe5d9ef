//! Geometric quantiles of bivariate normal data along a ring of directions.

use geomed::lp_core::Direction;
use geomed::simstudy::{gen_data, DataDistribution};
use geomed::solver::{geometric_quantile, SolverOptions};
use geomed::{NormSpec, RngSeed, WeightVector};

fn main() -> geomed::Result<()> {
    let data = gen_data(DataDistribution::Normal, 500, 2, RngSeed::new(3))?;
    let spec = NormSpec::euclidean();
    let w = WeightVector::uniform(data.n());
    for radius in [0.0, 0.5, 0.9] {
        for step in 0..4 {
            let angle = std::f64::consts::FRAC_PI_2 * step as f64;
            let u = Direction::new(vec![radius * angle.cos(), radius * angle.sin()], &spec)?;
            let r = geometric_quantile(&data, &w, &u, &spec, &SolverOptions::default())?;
            println!(
                "u = ({:+.2}, {:+.2}) -> ({:+.4}, {:+.4})",
                u.as_slice()[0],
                u.as_slice()[1],
                r.minimizer[0],
                r.minimizer[1]
            );
            if radius == 0.0 {
                break;
            }
        }
    }
    Ok(())
}
