//! Standard-library side of the planning toolkit: solver backends, scenario
//! files, fixture generation and result export.

pub mod backend;
pub mod export;
pub mod fixture;
pub mod scenario;

use hoods_core::model::SolveStatus;
use hoods_core::Error;

pub use backend::{solver_by_name, HighsSolver, MicrolpSolver};
pub use scenario::{load_scenario, write_scenario, Scenario, ScenarioConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

/// Process exit code for an error raised by the command line tool.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<scenario::LoadErrors>().is_some() {
        return EXIT_VALIDATION;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidArgument(_)) => EXIT_VALIDATION,
        Some(Error::StageInfeasible { .. } | Error::GridInfeasible { .. }) => EXIT_INFEASIBLE,
        Some(Error::Solve {
            status: SolveStatus::Infeasible | SolveStatus::Unbounded,
            ..
        }) => EXIT_INFEASIBLE,
        _ => EXIT_SOLVER,
    }
}
