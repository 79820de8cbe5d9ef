use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("direction outside the open unit q-ball: ||u||_q = {norm}")]
    Domain { norm: f64 },

    #[error("score undefined: observation coincides with the evaluation point")]
    CoincidentPoint,

    #[error("derivative singular at coordinate {coord} (p = {p} < 2 with a coordinate tie)")]
    Singularity { coord: usize, p: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("solver did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NonConvergence {
        best: Vec<f64>,
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("sampler degeneracy: {dropped} of {requested} posterior draws failed")]
    SamplerDegeneracy { dropped: usize, requested: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unstable estimate: condition number {condition:e}")]
    Unstable { condition: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("serialization: {0}")]
    Serialization(#[from] serde_json::Error),

    #[error("internal: {0}")]
    Internal(String),
}

/// Process exit codes used by the command-line front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Usage = 2,
    InputData = 3,
    Numerical = 4,
    Internal = 5,
}

impl Error {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Error::InvalidInput(_)
            | Error::Domain { .. }
            | Error::DimensionMismatch { .. }
            | Error::Io { .. }
            | Error::Parse { .. }
            | Error::InsufficientData(_) => ExitCode::InputData,
            Error::CoincidentPoint
            | Error::Singularity { .. }
            | Error::DegenerateGeometry(_)
            | Error::NonConvergence { .. }
            | Error::SamplerDegeneracy { .. }
            | Error::Unstable { .. } => ExitCode::Numerical,
            Error::Serialization(_) | Error::Internal(_) => ExitCode::Internal,
        }
    }
}
