//! 95% credible box and ellipsoid for the spatial median, with the
//! ellipsoid's principal axes.

use geomed::bootstrap::posterior_sample;
use geomed::lp_core::Direction;
use geomed::regions::{contains, ellipsoid, hyperrectangle, principal_axes, CredibleRegion};
use geomed::simstudy::{gen_data, DataDistribution};
use geomed::solver::SolverOptions;
use geomed::{NormSpec, RngSeed};

fn main() -> geomed::Result<()> {
    let data = gen_data(DataDistribution::Normal, 300, 2, RngSeed::new(21))?;
    let spec = NormSpec::euclidean();
    let post = posterior_sample(&data, &[Direction::zero(2)], &spec, 2000, RngSeed::new(5), &SolverOptions::default())?;
    let draws = post.block(0);

    let b = hyperrectangle(&draws, 0.95)?;
    println!("box: lo {:?}", b.lo);
    println!("     hi {:?}", b.hi);
    println!("     diameter {:.4}, mean width {:.4}", b.diameter(), b.mean_width());

    let e = ellipsoid(&draws, 0.95)?;
    println!("ellipsoid: center {:?}, radius {:.4}", e.center, e.radius);
    let axes = principal_axes(&e)?;
    for (v, len) in axes.axes.iter().zip(&axes.semi_axes) {
        println!("  axis ({:+.4}, {:+.4}), semi-axis {:.4}", v[0], v[1], len);
    }
    let truth = [0.0, 0.0];
    println!(
        "true median inside: box {}, ellipsoid {}",
        contains(&CredibleRegion::Hyperrectangle(b), &truth)?,
        contains(&CredibleRegion::Ellipsoid(e), &truth)?
    );
    Ok(())
}
