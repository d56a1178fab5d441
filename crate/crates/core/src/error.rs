use thiserror::Error;

use crate::planner::PlanResult;

/// Errors raised by the planning pipeline.
///
/// Each variant corresponds to a distinct failure mode so that callers (and the
/// command-line front end) can map them to stable exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("set is empty")]
    EmptySet,

    #[error("set is unbounded")]
    Unbounded,

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("equilibrium equations are inconsistent for the requested output")]
    NoEquilibrium,

    #[error("equilibrium input is not in the interior of the input set")]
    NoInteriorEquilibrium,

    #[error("solver failed: {message} (residual {residual:.3e})")]
    SolverFailure { message: String, residual: f64 },

    #[error("closed-loop matrix is not Schur stable (spectral radius {0:.12})")]
    NotStable(f64),

    #[error("sample is infeasible: {0}")]
    InfeasibleSample(String),

    #[error("point lies outside the free space")]
    OutsideFreeSpace,

    #[error("grid produced no samples inside the free space")]
    EmptyGrid,

    #[error("no local controller could be synthesized")]
    EmptyGraph,

    #[error("no controller corresponds to the target output")]
    A1Violated,

    #[error("initial state is not inside any controller's invariant set")]
    A2Violated,

    #[error("controller graph has no path from start to goal")]
    A3Violated,

    #[error("execution did not converge within {} steps", .0.steps())]
    Timeout(Box<PlanResult>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dim_err(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
