//! Solver backends: HiGHS through its C library, and microlp as a pure-Rust
//! fallback suited to small instances.

use std::time::Duration;

use highs::{HighsModelStatus, RowProblem, Sense as HSense};
use hoods_core::model::{ModelSpec, Sense, SolveParams, SolveStatus, Solver, SolverResult, VarKind};
use hoods_core::{Error, Result};

#[derive(Clone, Copy, Debug, Default)]
pub struct HighsSolver;

impl Solver for HighsSolver {
    fn name(&self) -> &str {
        "highs"
    }

    fn solve_raw(&self, spec: &ModelSpec, params: &SolveParams) -> Result<SolverResult> {
        let mut pb = RowProblem::default();
        let obj = spec.objective();
        let cols: Vec<_> = spec
            .variables()
            .iter()
            .enumerate()
            .map(|(i, v)| pb.add_column_with_integrality(obj[i], v.lower..=v.upper, v.kind == VarKind::Binary))
            .collect();
        for c in spec.constraints() {
            let row: Vec<_> = c.terms.iter().map(|&(v, a)| (cols[v.index()], a)).collect();
            match c.sense {
                Sense::Le => pb.add_row(..=c.rhs, row),
                Sense::Ge => pb.add_row(c.rhs.., row),
                Sense::Eq => pb.add_row(c.rhs..=c.rhs, row),
            }
        }
        let mut model = pb.try_optimise(HSense::Minimise).map_err(|s| Error::Environment(format!("HiGHS rejected the model: {s:?}")))?;
        model.make_quiet();
        model.set_option("mip_rel_gap", params.mip_gap);
        model.set_option("primal_feasibility_tolerance", params.feasibility_tol * 1e-2);
        model.set_option("mip_feasibility_tolerance", params.feasibility_tol * 1e-2);
        if let Some(t) = params.time_limit {
            model.set_option("time_limit", t);
        }
        if let Some(n) = params.threads {
            model.set_option("threads", n as i32);
        }
        let solved = model.try_solve().map_err(|s| Error::Environment(format!("HiGHS failed: {s:?}")))?;
        let has_int = spec.num_binaries() > 0;
        let status = match solved.status() {
            HighsModelStatus::Optimal => SolveStatus::Optimal,
            HighsModelStatus::ModelEmpty => SolveStatus::Optimal,
            HighsModelStatus::Infeasible => SolveStatus::Infeasible,
            HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => SolveStatus::Unbounded,
            HighsModelStatus::ReachedTimeLimit | HighsModelStatus::ReachedIterationLimit => SolveStatus::Timeout,
            other => return Err(Error::Environment(format!("HiGHS ended with status {other:?}"))),
        };
        if !matches!(status, SolveStatus::Optimal | SolveStatus::Timeout) {
            return Ok(SolverResult::without_solution(status));
        }
        let values = solved.get_solution().columns().to_vec();
        let gap = if has_int { Some(solved.mip_gap()) } else { Some(0.0) };
        let status = match status {
            // A time-limited run with an incumbent still carries a usable point.
            SolveStatus::Timeout if values.len() == spec.num_vars() && gap.is_some_and(f64::is_finite) => SolveStatus::FeasibleGap,
            SolveStatus::Timeout => return Ok(SolverResult::without_solution(SolveStatus::Timeout)),
            s => s,
        };
        Ok(SolverResult {
            status,
            objective: Some(solved.objective_value()),
            values: Some(values),
            mip_gap: gap,
        })
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MicrolpSolver;

impl Solver for MicrolpSolver {
    fn name(&self) -> &str {
        "microlp"
    }

    fn solve_raw(&self, spec: &ModelSpec, params: &SolveParams) -> Result<SolverResult> {
        use microlp::{ComparisonOp, OptimizationDirection, Problem, SolutionStatus, SolveOptions, SolveOutcome};

        let mut pb = Problem::new(OptimizationDirection::Minimize);
        let obj = spec.objective();
        let vars: Vec<_> = spec
            .variables()
            .iter()
            .enumerate()
            .map(|(i, v)| match v.kind {
                VarKind::Binary => pb.add_integer_var(obj[i], (v.lower.round() as i32, v.upper.round() as i32)),
                VarKind::Continuous => pb.add_var(obj[i], (v.lower, v.upper)),
            })
            .collect();
        for c in spec.constraints() {
            if c.terms.is_empty() {
                if c.violation(&[]) > params.feasibility_tol {
                    return Ok(SolverResult::without_solution(SolveStatus::Infeasible));
                }
                continue;
            }
            let op = match c.sense {
                Sense::Le => ComparisonOp::Le,
                Sense::Ge => ComparisonOp::Ge,
                Sense::Eq => ComparisonOp::Eq,
            };
            let expr: Vec<_> = c.terms.iter().map(|&(v, a)| (vars[v.index()], a)).collect();
            pb.add_constraint(expr, op, c.rhs);
        }
        let mut opts = SolveOptions::default();
        opts.mip_gap = params.mip_gap;
        opts.time_limit = params.time_limit.map(Duration::from_secs_f64);
        match pb.solve_with(opts) {
            Ok(SolveOutcome::Solution(sol)) => {
                let values: Vec<f64> = vars.iter().map(|&v| sol.var_value_raw(v)).collect();
                let status = match sol.status() {
                    SolutionStatus::Optimal => SolveStatus::Optimal,
                    SolutionStatus::Feasible => SolveStatus::FeasibleGap,
                };
                Ok(SolverResult {
                    status,
                    objective: Some(sol.objective()),
                    values: Some(values),
                    mip_gap: sol.gap(),
                })
            }
            Ok(SolveOutcome::Interrupted(_)) => Ok(SolverResult::without_solution(SolveStatus::Timeout)),
            Err(microlp::Error::Infeasible) => Ok(SolverResult::without_solution(SolveStatus::Infeasible)),
            Err(microlp::Error::Unbounded) => Ok(SolverResult::without_solution(SolveStatus::Unbounded)),
            Err(e) => Err(Error::Environment(format!("microlp failed: {e:?}"))),
        }
    }
}

/// Backend by name: `highs` or `microlp`.
pub fn solver_by_name(name: &str) -> Result<Box<dyn Solver + Send + Sync>> {
    match name.to_ascii_lowercase().as_str() {
        "highs" => Ok(Box::new(HighsSolver)),
        "microlp" => Ok(Box::new(MicrolpSolver)),
        other => Err(Error::InvalidArgument(format!("unknown solver `{other}` (expected highs or microlp)"))),
    }
}
