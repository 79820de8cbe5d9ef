//! Coverage and size of 95% credible boxes for the spatial median of
//! bivariate normal data.
//!
//! cargo run --release --example coverage_study -- [n] [replications] [draws]

use geomed::simstudy::{run_table, DataDistribution, Method, RegionKind, SimConfig};

fn main() -> geomed::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(100);
    let replications = args.get(1).copied().unwrap_or(100);
    let draws = args.get(2).copied().unwrap_or(500);
    let cells: Vec<SimConfig> = [RegionKind::Box, RegionKind::Ellipsoid]
        .into_iter()
        .map(|region| SimConfig {
            distribution: DataDistribution::Normal,
            k: 2,
            n,
            p: 2.0,
            method: Method::Plain,
            region,
            level: 0.95,
            replications,
            draws,
            seed: 2024,
        })
        .collect();
    let table = run_table(&cells)?;
    print!("{}", table.to_text());
    for c in &table.cells {
        println!("{}: joint coverage {:.3}, {:.1}s", c.config.region, c.joint_coverage, c.wall_clock);
    }
    Ok(())
}
