//! Bayesian-bootstrap posterior of the spatial median and two geometric
//! quantiles, drawn jointly from shared Dirichlet weights.

use geomed::bootstrap::posterior_sample;
use geomed::lp_core::Direction;
use geomed::simstudy::{gen_data, DataDistribution};
use geomed::solver::SolverOptions;
use geomed::{NormSpec, RngSeed};

fn main() -> geomed::Result<()> {
    let data = gen_data(DataDistribution::Laplace, 200, 2, RngSeed::new(8))?;
    let spec = NormSpec::euclidean();
    let dirs = vec![
        Direction::zero(2),
        Direction::new(vec![0.5, 0.0], &spec)?,
        Direction::new(vec![0.0, -0.5], &spec)?,
    ];
    let post = posterior_sample(&data, &dirs, &spec, 1000, RngSeed::new(1), &SolverOptions::default())?;
    for (l, u) in dirs.iter().enumerate() {
        let block = post.block(l);
        let mean = block.mean();
        let cov = block.sample_covariance()?;
        println!(
            "u = {:?}: estimate {:?}, posterior mean ({:.4}, {:.4}), sd ({:.4}, {:.4})",
            u.as_slice(),
            post.centers[l].iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>(),
            mean[0],
            mean[1],
            cov[(0, 0)].sqrt(),
            cov[(1, 1)].sqrt()
        );
    }
    println!("{} draws, {} dropped", post.len(), post.dropped);
    Ok(())
}
