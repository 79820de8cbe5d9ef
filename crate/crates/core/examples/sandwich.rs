//! Plug-in sandwich covariance of the spatial median against the spread of
//! its Bayesian-bootstrap posterior.

use geomed::asymptotics::sandwich;
use geomed::bootstrap::posterior_sample;
use geomed::lp_core::Direction;
use geomed::simstudy::{gen_data, DataDistribution};
use geomed::solver::SolverOptions;
use geomed::{NormSpec, RngSeed};

fn main() -> geomed::Result<()> {
    let n = 1000;
    let data = gen_data(DataDistribution::Normal, n, 2, RngSeed::new(4))?;
    let spec = NormSpec::euclidean();
    let post = posterior_sample(&data, &[Direction::zero(2)], &spec, 1000, RngSeed::new(6), &SolverOptions::default())?;
    let s = sandwich(&data, &post.centers[0], &spec)?;
    println!("psi_dot {}", s.psi_dot_hat);
    println!("sigma {}", s.sigma_hat);
    println!("sandwich (sqrt(n) scale) {}", s.cov);
    let centered = post.block(0);
    let c = centered.sample_covariance()? * n as f64;
    println!("posterior covariance x n {c}");
    Ok(())
}
