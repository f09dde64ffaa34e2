use alloc::string::String;
use alloc::vec::Vec;

use crate::model::SolveStatus;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// A constraint that could not be satisfied, with the amount of slack an
/// elastic re-solve needed to restore feasibility.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub label: String,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver environment error: {0}")]
    Environment(String),

    #[error("{stage}: solver returned status {status}")]
    Solve { stage: String, status: SolveStatus },

    #[error("solution violates `{label}` by {residual:e}")]
    Residual { label: String, residual: f64 },

    /// The dispatch stage became infeasible once capacities were fixed, e.g.
    /// because the reduced time grid missed a binding hour.
    #[error("{stage} is infeasible with fixed capacities ({} violated constraints)", .violations.len())]
    StageInfeasible {
        stage: String,
        violations: Vec<Violation>,
    },

    /// The grid stage cannot host the building profiles. `worst_steps` holds
    /// `(timestep, unserved kW)` sorted by decreasing violation.
    #[error("grid stage infeasible; worst timesteps: {worst_steps:?}")]
    GridInfeasible { worst_steps: Vec<(usize, f64)> },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
