use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("field lives on a different grid")]
    GridMismatch,

    #[error("linear solver did not reach tolerance: {iterations} iterations, relative residual {residual:e}")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("CFL condition violated: number {cfl} exceeds {limit}")]
    CflViolation { cfl: f64, limit: f64 },

    #[error("negative argument {value} at node {node}")]
    NegativeArgument { node: usize, value: f64 },

    #[error("{field} = {value} at node {node} outside the admissible band [{lower}, {upper}]")]
    DensityOutOfBand {
        field: &'static str,
        node: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("no convergent time window found after {shrinks} shrinks")]
    WindowCollapse { shrinks: usize },

    #[error("vacuum: density {value} at node {node}")]
    VacuumDensity { node: usize, value: f64 },

    #[error("field does not vanish on the boundary (node {node}, value {value})")]
    NotZeroTrace { node: usize, value: f64 },

    #[error("at t = {t}: {source}")]
    AtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("snapshot format error in {path}: {reason}")]
    Snapshot { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at(self, t: f64) -> Self {
        match self {
            e @ Error::AtTime { .. } => e,
            e => Error::AtTime {
                t,
                source: Box::new(e),
            },
        }
    }

    /// Strips time annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } => source.root(),
            e => e,
        }
    }
}
