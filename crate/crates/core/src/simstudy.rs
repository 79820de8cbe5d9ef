//! Monte Carlo coverage and size studies of median credible regions.

use std::fmt::Write as _;
use std::time::Instant;

use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affine::{select_alpha, tr_posterior_sample, DEFAULT_CANDIDATES};
use crate::bootstrap::posterior_sample;
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::lp_core::{Direction, NormSpec};
use crate::regions::{ellipsoid, hyperrectangle, CredibleRegion};
use crate::rng::RngSeed;
use crate::solver::SolverOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataDistribution {
    Normal,
    Laplace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Plain,
    Affine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Box,
    Ellipsoid,
}

impl std::fmt::Display for DataDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DataDistribution::Normal => "normal",
            DataDistribution::Laplace => "laplace",
        })
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Plain => "plain",
            Method::Affine => "affine",
        })
    }
}

impl std::fmt::Display for RegionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegionKind::Box => "box",
            RegionKind::Ellipsoid => "ellipsoid",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub distribution: DataDistribution,
    pub k: usize,
    pub n: usize,
    pub p: f64,
    pub method: Method,
    pub region: RegionKind,
    pub level: f64,
    pub replications: usize,
    pub draws: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 || self.replications == 0 || self.draws == 0 {
            return Err(Error::InvalidInput("simulation counts must be at least one".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidInput(format!("level must lie in (0, 1), got {}", self.level)));
        }
        NormSpec::new(self.p)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    /// Mean box diameter or mean ellipsoid radius.
    pub size: f64,
    /// Mean box width across coordinates; absent for ellipsoids.
    pub mean_width: Option<f64>,
    /// Ellipsoids: fraction of replications whose region contains the true
    /// median. Boxes: mean fraction of coordinate intervals that do.
    pub coverage: f64,
    /// Fraction of replications whose whole region contains the truth.
    pub joint_coverage: f64,
    pub mc_se: f64,
    pub failed: usize,
    /// Seconds; not serialized so that result files are reproducible.
    #[serde(skip)]
    pub wall_clock: f64,
}

/// `n` iid rows with mean zero and identity covariance: standard normal
/// coordinates, or Laplace coordinates with scale `1/sqrt(2)`.
pub fn gen_data(dist: DataDistribution, n: usize, k: usize, seed: RngSeed) -> Result<DataMatrix> {
    let mut rng = seed.rng();
    let b = std::f64::consts::FRAC_1_SQRT_2;
    let values = (0..n * k)
        .map(|_| match dist {
            DataDistribution::Normal => StandardNormal.sample(&mut rng),
            DataDistribution::Laplace => {
                let e1: f64 = Exp1.sample(&mut rng);
                let e2: f64 = Exp1.sample(&mut rng);
                b * (e1 - e2)
            }
        })
        .collect();
    DataMatrix::new(n, k, values)
}

struct Replication {
    size: f64,
    mean_width: f64,
    covered: f64,
    joint: bool,
}

fn replicate(cfg: &SimConfig, spec: &NormSpec, seed: RngSeed, opts: &SolverOptions) -> Result<Replication> {
    let data = gen_data(cfg.distribution, cfg.n, cfg.k, seed.derive(0))?;
    let post = match cfg.method {
        Method::Plain => posterior_sample(&data, &[Direction::zero(cfg.k)], spec, cfg.draws, seed.derive(1), opts)?,
        Method::Affine => {
            let alpha = select_alpha(&data, DEFAULT_CANDIDATES, seed.derive(2))?;
            tr_posterior_sample(&data, &alpha, spec, cfg.draws, seed.derive(1), opts)?
        }
    };
    let draws = post.block(0);
    let truth = vec![0.0; cfg.k];
    match cfg.region {
        RegionKind::Box => {
            let b = hyperrectangle(&draws, cfg.level)?;
            let inside = b.contains_coordinates(&truth)?;
            let hits = inside.iter().filter(|x| **x).count();
            Ok(Replication {
                size: b.diameter(),
                mean_width: b.mean_width(),
                covered: hits as f64 / cfg.k as f64,
                joint: hits == cfg.k,
            })
        }
        RegionKind::Ellipsoid => {
            let e = ellipsoid(&draws, cfg.level)?;
            let region = CredibleRegion::Ellipsoid(e);
            let hit = crate::regions::contains(&region, &truth)?;
            Ok(Replication {
                size: region.size(),
                mean_width: f64::NAN,
                covered: if hit { 1.0 } else { 0.0 },
                joint: hit,
            })
        }
    }
}

/// Runs `R` independent replications of one configuration. Replication `r`
/// uses the seed `RngSeed::new(seed).derive(r)`, so results do not depend
/// on scheduling.
pub fn run_cell(cfg: &SimConfig) -> Result<SimResult> {
    run_cell_with(cfg, &SolverOptions::default())
}

pub fn run_cell_with(cfg: &SimConfig, opts: &SolverOptions) -> Result<SimResult> {
    cfg.validate()?;
    let spec = NormSpec::new(cfg.p)?;
    let master = RngSeed::new(cfg.seed);
    let start = Instant::now();
    let reps: Vec<Result<Replication>> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| replicate(cfg, &spec, master.derive(r), opts))
        .collect();
    let wall_clock = start.elapsed().as_secs_f64();
    let mut ok = Vec::with_capacity(reps.len());
    let mut failed = 0;
    let mut first_err = None;
    for r in reps {
        match r {
            Ok(x) => ok.push(x),
            Err(e) => {
                failed += 1;
                first_err.get_or_insert(e);
            }
        }
    }
    if failed * 100 > cfg.replications || ok.is_empty() {
        return Err(first_err.expect("at least one failure"));
    }
    let m = ok.len() as f64;
    let size = ok.iter().map(|r| r.size).sum::<f64>() / m;
    let coverage = ok.iter().map(|r| r.covered).sum::<f64>() / m;
    let joint_coverage = ok.iter().filter(|r| r.joint).count() as f64 / m;
    let mean_width = match cfg.region {
        RegionKind::Box => Some(ok.iter().map(|r| r.mean_width).sum::<f64>() / m),
        RegionKind::Ellipsoid => None,
    };
    Ok(SimResult {
        config: cfg.clone(),
        size,
        mean_width,
        coverage,
        joint_coverage,
        mc_se: (coverage * (1.0 - coverage) / cfg.replications as f64).sqrt(),
        failed,
        wall_clock,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTable {
    pub cells: Vec<SimResult>,
}

/// Runs every configuration in order.
pub fn run_table(configs: &[SimConfig]) -> Result<SimTable> {
    if configs.is_empty() {
        return Err(Error::InvalidInput("no simulation cells requested".into()));
    }
    let cells = configs.iter().map(run_cell).collect::<Result<Vec<_>>>()?;
    Ok(SimTable { cells })
}

impl SimTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "distribution,k,p,n,method,region,level,replications,draws,seed,size,mean_width,coverage,joint_coverage,mc_se,failed\n",
        );
        for c in &self.cells {
            let g = &c.config;
            let mw = c.mean_width.map(|w| format!("{w:.17e}")).unwrap_or_default();
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{:.17e},{},{:.17e},{:.17e},{:.17e},{}",
                g.distribution,
                g.k,
                g.p,
                g.n,
                g.method,
                g.region,
                g.level,
                g.replications,
                g.draws,
                g.seed,
                c.size,
                mw,
                c.coverage,
                c.joint_coverage,
                c.mc_se,
                c.failed
            )
            .expect("write to string");
        }
        s
    }

    /// Aligned text: one row per (method, distribution, p), one column per `n`.
    pub fn to_text(&self) -> String {
        let mut ns: Vec<usize> = self.cells.iter().map(|c| c.config.n).collect();
        ns.sort_unstable();
        ns.dedup();
        let mut rows: Vec<(Method, DataDistribution, u64, usize, RegionKind)> = Vec::new();
        for c in &self.cells {
            let g = &c.config;
            let key = (g.method, g.distribution, g.p.to_bits(), g.k, g.region);
            if !rows.contains(&key) {
                rows.push(key);
            }
        }
        let label = |&(method, dist, pbits, k, region): &(Method, DataDistribution, u64, usize, RegionKind)| {
            format!("{method} {dist} {region} k={k} p={}", f64::from_bits(pbits))
        };
        let width = rows.iter().map(|r| label(r).len()).max().unwrap_or(0) + 2;
        let mut out = String::new();
        for (title, pick) in [("size", 0), ("coverage", 1)] {
            write!(out, "{title:<width$}").unwrap();
            for n in &ns {
                write!(out, "{:>18}", format!("n={n}")).unwrap();
            }
            out.push('\n');
            for row in &rows {
                let (method, dist, pbits, k, region) = row;
                write!(out, "{:<width$}", label(row)).unwrap();
                for n in &ns {
                    let cell = self.cells.iter().find(|c| {
                        let g = &c.config;
                        g.method == *method
                            && g.distribution == *dist
                            && g.p.to_bits() == *pbits
                            && g.k == *k
                            && g.region == *region
                            && g.n == *n
                    });
                    let text = match cell {
                        Some(c) if pick == 0 => format!("{:.3}", c.size),
                        Some(c) => format!("{:.3} ({:.3})", c.coverage, c.mc_se),
                        None => "-".into(),
                    };
                    write!(out, "{text:>18}").unwrap();
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

/// The 12-cell grid of distribution x p x n in {100, 1000, 10000}.
pub fn full_grid(k: usize, region: RegionKind, method: Method, replications: usize, draws: usize, seed: u64) -> Vec<SimConfig> {
    grid(k, region, method, &[100, 1000, 10_000], replications, draws, seed)
}

/// Desk-scale grid: n in {100, 1000}, 500 replications of 1000 draws.
pub fn desk_grid(k: usize, region: RegionKind, method: Method, seed: u64) -> Vec<SimConfig> {
    grid(k, region, method, &[100, 1000], 500, 1000, seed)
}

fn grid(
    k: usize,
    region: RegionKind,
    method: Method,
    ns: &[usize],
    replications: usize,
    draws: usize,
    seed: u64,
) -> Vec<SimConfig> {
    let mut out = Vec::new();
    for distribution in [DataDistribution::Normal, DataDistribution::Laplace] {
        for p in [2.0, 3.0] {
            for &n in ns {
                out.push(SimConfig {
                    distribution,
                    k,
                    n,
                    p,
                    method,
                    region,
                    level: 0.95,
                    replications,
                    draws,
                    seed,
                });
            }
        }
    }
    out
}
