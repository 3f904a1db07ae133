use std::path::PathBuf;

use thiserror::Error;

use crate::primal::PrimalState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Location of a failed per-point solve: time interval and flat spatial index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointLocation {
    pub interval: usize,
    pub point: usize,
}

impl std::fmt::Display for PointLocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "interval {}, point {}", self.interval, self.point)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("unsupported backend: {0}")]
    UnsupportedBackend(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("row {row} of alpha has nonzero mean {mean:e}; curl is not solvable")]
    NotCurlSolvable { row: usize, mean: f64 },

    #[error("row {row} of alpha has divergence {norm:e}; vector potential is ill-posed")]
    IllPosedPotential { row: usize, norm: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("step size violates CFL bound: courant number {courant:.4} > {limit}")]
    StepSize { courant: f64, limit: f64 },

    #[error("non-finite state at step {step} (t = {time}); last good state kept")]
    NumericalAbort {
        step: usize,
        time: f64,
        last_good: Box<PrimalState>,
    },

    #[error("mapping failure at {location:?}: pivot {pivot:e} below floor {floor:e}")]
    MappingFailure {
        location: Option<PointLocation>,
        pivot: f64,
        floor: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("line search stagnated after {iterations} iterations")]
    Stagnation {
        iterations: usize,
        last: Box<crate::dual::DualSolution>,
    },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("file format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
