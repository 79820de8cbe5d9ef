use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use geomed::cli_io::{execute, replay, Command, InputSpec, RowFilter};
use geomed::error::ExitCode as Code;
use geomed::simstudy::{desk_grid, full_grid, DataDistribution, Method, RegionKind, SimConfig};
use geomed::Error;

#[derive(Parser)]
#[command(name = "geomed", version, about = "lp-medians, geometric quantiles and their Bayesian credible regions")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Input {
    /// Delimited numeric data file.
    #[arg(long)]
    input: PathBuf,
    /// Columns to use, by header name or 0-based index.
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<String>>,
    /// Keep only rows with COLUMN=VALUE.
    #[arg(long, value_name = "COLUMN=VALUE")]
    filter: Option<String>,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// The first line holds data, not column names.
    #[arg(long)]
    no_header: bool,
}

#[derive(Args)]
struct Common {
    /// Exponent of the lp norm, p > 1.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegionArg {
    Box,
    Ellipsoid,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Plain,
    Affine,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    Normal,
    Laplace,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    BoxK2,
    BoxK3,
    EllipsoidK2,
    EllipsoidK3,
}

#[derive(Subcommand)]
enum Cmd {
    /// Spatial (lp) median of the rows.
    Median {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        common: Common,
    },
    /// Geometric quantiles at one or more directions.
    Quantile {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        common: Common,
        /// Direction as a comma-separated vector; repeatable.
        #[arg(long, required = true, allow_hyphen_values = true)]
        u: Vec<String>,
    },
    /// Posterior draws and a credible region for the median or quantiles.
    Credible {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        u: Vec<String>,
        #[arg(long, default_value_t = 2000)]
        draws: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, value_enum, default_value_t = RegionArg::Ellipsoid)]
        region: RegionArg,
        #[arg(long, value_enum, default_value_t = MethodArg::Plain)]
        method: MethodArg,
        #[arg(long, default_value_t = 500)]
        candidates: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Affine-equivariant transformation-retransformation median.
    Trmedian {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 500)]
        candidates: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Monte Carlo coverage study.
    Simulate {
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        #[arg(long, value_enum, default_value_t = DistArg::Normal)]
        dist: DistArg,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Plain)]
        method: MethodArg,
        #[arg(long, value_enum, default_value_t = RegionArg::Box)]
        region: RegionArg,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value_t = 500)]
        replications: usize,
        #[arg(long, default_value_t = 1000)]
        draws: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Per-species credible ellipsoids for iris-layout data.
    Iris {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "4")]
        species_column: String,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
        columns: Vec<String>,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 2000)]
        draws: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Rerun the command recorded in a result file or manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn input_spec(i: Input) -> Result<InputSpec, Error> {
    let filter = match i.filter {
        Some(f) => {
            let (column, value) = f
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("filter {f:?} is not COLUMN=VALUE")))?;
            Some(RowFilter {
                column: column.into(),
                value: value.into(),
            })
        }
        None => None,
    };
    Ok(InputSpec {
        path: i.input,
        delimiter: i.delimiter,
        has_header: !i.no_header,
        columns: i.columns,
        filter,
    })
}

fn parse_vectors(u: &[String]) -> Result<Vec<Vec<f64>>, Error> {
    u.iter()
        .map(|s| {
            s.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidInput(format!("direction {s:?} is not a numeric vector")))
                })
                .collect()
        })
        .collect()
}

fn region(r: RegionArg) -> RegionKind {
    match r {
        RegionArg::Box => RegionKind::Box,
        RegionArg::Ellipsoid => RegionKind::Ellipsoid,
    }
}

fn method(m: MethodArg) -> Method {
    match m {
        MethodArg::Plain => Method::Plain,
        MethodArg::Affine => Method::Affine,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let (command, out) = match cli.command {
        Cmd::Median { input, common } => (
            Command::Median {
                input: input_spec(input)?,
                p: common.p,
            },
            common.out,
        ),
        Cmd::Quantile { input, common, u } => (
            Command::Quantile {
                input: input_spec(input)?,
                p: common.p,
                u: parse_vectors(&u)?,
            },
            common.out,
        ),
        Cmd::Credible {
            input,
            common,
            u,
            draws,
            level,
            region: r,
            method: m,
            candidates,
            seed,
        } => (
            Command::Credible {
                input: input_spec(input)?,
                p: common.p,
                u: parse_vectors(&u)?,
                draws,
                level,
                region: region(r),
                method: method(m),
                candidates,
                seed,
            },
            common.out,
        ),
        Cmd::Trmedian {
            input,
            common,
            candidates,
            seed,
        } => (
            Command::Trmedian {
                input: input_spec(input)?,
                p: common.p,
                candidates,
                seed,
            },
            common.out,
        ),
        Cmd::Simulate {
            preset,
            dist,
            k,
            n,
            p,
            method: m,
            region: r,
            level,
            replications,
            draws,
            seed,
            out,
        } => {
            let m = method(m);
            let cells = match preset {
                Some(Preset::Desk) => desk_grid(k, region(r), m, seed),
                Some(Preset::BoxK2) => full_grid(2, RegionKind::Box, m, replications, draws, seed),
                Some(Preset::BoxK3) => full_grid(3, RegionKind::Box, m, replications, draws, seed),
                Some(Preset::EllipsoidK2) => full_grid(2, RegionKind::Ellipsoid, m, replications, draws, seed),
                Some(Preset::EllipsoidK3) => full_grid(3, RegionKind::Ellipsoid, m, replications, draws, seed),
                None => vec![SimConfig {
                    distribution: match dist {
                        DistArg::Normal => DataDistribution::Normal,
                        DistArg::Laplace => DataDistribution::Laplace,
                    },
                    k,
                    n,
                    p,
                    method: m,
                    region: region(r),
                    level,
                    replications,
                    draws,
                    seed,
                }],
            };
            let preset = preset.map(|p| p.to_possible_value().expect("named preset").get_name().to_string());
            (Command::Simulate { preset, cells }, out)
        }
        Cmd::Iris {
            input,
            species_column,
            columns,
            p,
            draws,
            level,
            seed,
            out,
        } => (
            Command::Iris {
                input: InputSpec::new(input),
                species_column,
                features: columns,
                p,
                draws,
                level,
                seed,
            },
            out,
        ),
        Cmd::Replay { manifest, out } => {
            for path in replay(&manifest, &out)? {
                println!("{}", path.display());
            }
            return Ok(());
        }
    };
    for path in execute(&command, &out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Code::Usage as u8 } else { Code::Ok as u8 });
        }
    };
    if let Some(n) = std::env::var("GEOMED_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(Code::Internal as u8);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
