pub mod affine;
pub mod asymptotics;
pub mod bootstrap;
pub mod cli_io;
pub mod data;
pub mod error;
pub mod lp_core;
pub mod regions;
pub mod rng;
pub mod simstudy;
pub mod solver;

pub use data::{DataMatrix, WeightVector};
pub use error::{Error, Result};
pub use lp_core::{Direction, NormSpec};
pub use rng::RngSeed;
pub use solver::{SolveReport, SolverOptions};
