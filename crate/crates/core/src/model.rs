//! Solver-agnostic linear model representation.
//!
//! A [`ModelSpec`] holds variables, labelled linear constraints and a
//! minimisation objective. Backends implement [`Solver`]; [`solve`] wraps a
//! backend call with spec validation and an independent residual re-check of
//! every reported solution.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

/// Index of a variable inside one [`ModelSpec`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub label: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.index()]).sum()
    }

    /// Amount by which `values` violate this constraint (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// An assembled mixed-integer linear program (always minimised).
#[derive(Clone, Debug, Default)]
pub struct ModelSpec {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<f64>,
    names: BTreeMap<String, VarId>,
    labels: BTreeSet<String>,
    defects: Vec<String>,
}

impl ModelSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> VarId {
        let name = name.into();
        let id = VarId(self.variables.len() as u32);
        if self.names.insert(name.clone(), id).is_some() {
            self.defects.push(format!("duplicate variable name `{name}`"));
        }
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            VarKind::Continuous => (lower, upper),
        };
        self.variables.push(Variable { name, kind, lower, upper });
        self.objective.push(0.0);
        id
    }

    pub fn continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    /// Continuous variable with bounds `[0, +inf)`.
    pub fn nonneg(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Continuous, 0.0, f64::INFINITY)
    }

    pub fn free(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn add_constraint(
        &mut self,
        label: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        let label = label.into();
        if !self.labels.insert(label.clone()) {
            self.defects.push(format!("duplicate constraint label `{label}`"));
        }
        let terms = merge_terms(terms);
        self.constraints.push(Constraint { label, terms, sense, rhs });
        self.constraints.len() - 1
    }

    pub fn add_objective(&mut self, var: VarId, coef: f64) {
        self.objective[var.index()] += coef;
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let v = &mut self.variables[var.index()];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, var: VarId) -> &Variable {
        &self.variables[var.index()]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.names.get(name).copied()
    }

    pub fn constraint_by_label(&self, label: &str) -> Option<&Constraint> {
        if !self.labels.contains(label) {
            return None;
        }
        self.constraints.iter().find(|c| c.label == label)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, x)| c * x).sum()
    }

    /// Checks the structural invariants: unique names and labels, finite
    /// coefficients, declared variable references and consistent bounds.
    pub fn validate(&self) -> Result<()> {
        let mut problems = self.defects.clone();
        let n = self.variables.len();
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                problems.push(format!("variable `{}` has bounds [{}, {}]", v.name, v.lower, v.upper));
            }
        }
        for (i, c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                problems.push(format!("objective coefficient of `{}` is {c}", self.variables[i].name));
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                problems.push(format!("constraint `{}` has rhs {}", c.label, c.rhs));
            }
            for &(v, coef) in &c.terms {
                if v.index() >= n {
                    problems.push(format!("constraint `{}` references undeclared variable", c.label));
                } else if !coef.is_finite() {
                    problems.push(format!("constraint `{}` has coefficient {coef}", c.label));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            problems.truncate(20);
            Err(Error::invalid(format!("malformed model: {}", problems.join("; "))))
        }
    }

    /// Largest bound, integrality or constraint violation of `values`, with
    /// the name of the offending row or column.
    pub fn max_violation(&self, values: &[f64]) -> (f64, String) {
        let mut worst = (0.0, String::new());
        for v in self.variables.iter().zip(values) {
            let (var, &x) = v;
            let mut viol = (var.lower - x).max(x - var.upper).max(0.0);
            if var.kind == VarKind::Binary {
                viol = viol.max((x - libm::round(x)).abs());
            }
            if !x.is_finite() {
                viol = f64::INFINITY;
            }
            if viol > worst.0 {
                worst = (viol, var.name.clone());
            }
        }
        for c in &self.constraints {
            let viol = c.violation(values);
            if viol > worst.0 || viol.is_nan() {
                worst = (viol, c.label.clone());
            }
        }
        worst
    }

    /// Returns a copy with every listed variable fixed to its value.
    ///
    /// Values outside the variable's current bounds (beyond `1e-9`) and
    /// fractional values for binaries are rejected.
    pub fn fix_variables(&self, assignments: &[(VarId, f64)]) -> Result<ModelSpec> {
        let mut fixed = self.clone();
        for &(var, value) in assignments {
            let v = fixed
                .variables
                .get_mut(var.index())
                .ok_or_else(|| Error::invalid("fix_variables: unknown variable"))?;
            if !value.is_finite() || value < v.lower - 1e-9 || value > v.upper + 1e-9 {
                return Err(Error::invalid(format!(
                    "cannot fix `{}` to {value}: outside bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.kind == VarKind::Binary && value != 0.0 && value != 1.0 {
                return Err(Error::invalid(format!("cannot fix binary `{}` to {value}", v.name)));
            }
            let value = value.clamp(v.lower, v.upper);
            v.lower = value;
            v.upper = value;
        }
        Ok(fixed)
    }

    /// Writes the model in CPLEX LP text format.
    pub fn to_lp(&self) -> String {
        let mut out = String::new();
        out.push_str("\\ hoods model\nMinimize\n obj:");
        let mut any = false;
        let mut col = 0;
        for (i, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                write_term(&mut out, c, &self.variables[i].name, !any);
                any = true;
                col += 1;
                if col % 8 == 0 {
                    out.push_str("\n  ");
                }
            }
        }
        if !any && !self.variables.is_empty() {
            // Some readers reject an empty objective row.
            write_term(&mut out, 0.0, &self.variables[0].name, true);
        }
        out.push_str("\nSubject To\n");
        for c in &self.constraints {
            let _ = write!(out, " {}:", c.label);
            if c.terms.is_empty() {
                let _ = write!(out, " 0 {}", self.variables.first().map_or("x", |v| v.name.as_str()));
            }
            for (k, &(v, coef)) in c.terms.iter().enumerate() {
                write_term(&mut out, coef, &self.variables[v.index()].name, k == 0);
                if (k + 1) % 8 == 0 && k + 1 < c.terms.len() {
                    out.push_str("\n  ");
                }
            }
            let _ = writeln!(out, " {} {}", c.sense, num(c.rhs));
        }
        out.push_str("Bounds\n");
        for v in &self.variables {
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (true, true) if v.lower == v.upper => {
                    let _ = writeln!(out, " {} = {}", v.name, num(v.lower));
                }
                (true, true) => {
                    let _ = writeln!(out, " {} <= {} <= {}", num(v.lower), v.name, num(v.upper));
                }
                (true, false) => {
                    let _ = writeln!(out, " {} >= {}", v.name, num(v.lower));
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= {} <= {}", v.name, num(v.upper));
                }
                (false, false) => {
                    let _ = writeln!(out, " {} free", v.name);
                }
            }
        }
        let binaries: Vec<&str> = self
            .variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .map(|v| v.name.as_str())
            .collect();
        if !binaries.is_empty() {
            out.push_str("Binaries\n");
            for b in binaries {
                let _ = writeln!(out, " {b}");
            }
        }
        out.push_str("End\n");
        out
    }

    /// Writes the model in free-format MPS.
    pub fn to_mps(&self) -> String {
        let mut out = String::new();
        out.push_str("NAME hoods\nROWS\n N obj\n");
        for c in &self.constraints {
            let kind = match c.sense {
                Sense::Le => 'L',
                Sense::Ge => 'G',
                Sense::Eq => 'E',
            };
            let _ = writeln!(out, " {kind} {}", c.label);
        }
        let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.variables.len()];
        for (r, c) in self.constraints.iter().enumerate() {
            for &(v, coef) in &c.terms {
                columns[v.index()].push((r, coef));
            }
        }
        out.push_str("COLUMNS\n");
        let mut in_int = false;
        let mut marker = 0;
        for (i, v) in self.variables.iter().enumerate() {
            let is_int = v.kind == VarKind::Binary;
            if is_int != in_int {
                let tag = if is_int { "INTORG" } else { "INTEND" };
                let _ = writeln!(out, " M{marker} 'MARKER' '{tag}'");
                marker += 1;
                in_int = is_int;
            }
            let obj = self.objective[i];
            if obj != 0.0 || columns[i].is_empty() {
                let _ = writeln!(out, " {} obj {}", v.name, num(obj));
            }
            for &(r, coef) in &columns[i] {
                let _ = writeln!(out, " {} {} {}", v.name, self.constraints[r].label, num(coef));
            }
        }
        if in_int {
            let _ = writeln!(out, " M{marker} 'MARKER' 'INTEND'");
        }
        out.push_str("RHS\n");
        for c in &self.constraints {
            if c.rhs != 0.0 {
                let _ = writeln!(out, " RHS {} {}", c.label, num(c.rhs));
            }
        }
        out.push_str("BOUNDS\n");
        for v in &self.variables {
            let name = &v.name;
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (true, true) if v.lower == v.upper => {
                    let _ = writeln!(out, " FX BND {name} {}", num(v.lower));
                }
                (false, false) => {
                    let _ = writeln!(out, " FR BND {name}");
                }
                (lo, hi) => {
                    if !lo {
                        let _ = writeln!(out, " MI BND {name}");
                    } else if v.lower != 0.0 || v.kind == VarKind::Binary {
                        let _ = writeln!(out, " LO BND {name} {}", num(v.lower));
                    }
                    if hi {
                        let _ = writeln!(out, " UP BND {name} {}", num(v.upper));
                    }
                }
            }
        }
        out.push_str("ENDATA\n");
        out
    }
}

/// Sums repeated variables (first occurrence keeps its position) and drops
/// exact zeros, so backends never see duplicate column entries in a row.
fn merge_terms(terms: Vec<(VarId, f64)>) -> Vec<(VarId, f64)> {
    let mut out: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
    let mut seen: BTreeMap<VarId, usize> = BTreeMap::new();
    for (v, c) in terms {
        match seen.get(&v) {
            Some(&i) => out[i].1 += c,
            None => {
                seen.insert(v, out.len());
                out.push((v, c));
            }
        }
    }
    out.retain(|&(_, c)| c != 0.0);
    out
}

fn num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

fn write_term(out: &mut String, coef: f64, name: &str, first: bool) {
    let (sign, mag) = if coef < 0.0 { ('-', -coef) } else { ('+', coef) };
    if first && sign == '+' {
        let _ = write!(out, " {} {name}", num(mag));
    } else {
        let _ = write!(out, " {sign} {} {name}", num(mag));
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    /// A feasible incumbent was returned but the gap target was not proven.
    FeasibleGap,
    Infeasible,
    Unbounded,
    Timeout,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleGap)
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleGap => "feasible-gap",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::Timeout => "timeout",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveParams {
    /// Relative MIP gap at which the backend may stop.
    pub mip_gap: f64,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    pub threads: Option<u32>,
    /// Absolute tolerance for the post-solve residual re-check.
    pub feasibility_tol: f64,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            mip_gap: 1e-4,
            time_limit: None,
            threads: None,
            feasibility_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverResult {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub values: Option<Vec<f64>>,
    pub mip_gap: Option<f64>,
}

impl SolverResult {
    pub fn without_solution(status: SolveStatus) -> Self {
        Self {
            status,
            objective: None,
            values: None,
            mip_gap: None,
        }
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.values.as_ref().map_or(f64::NAN, |v| v[var.index()])
    }
}

/// Narrow interface to an external MILP engine: load the spec, apply the
/// parameters, solve and hand back column values.
pub trait Solver {
    fn name(&self) -> &str;

    fn solve_raw(&self, spec: &ModelSpec, params: &SolveParams) -> Result<SolverResult>;
}

/// Validates `spec`, solves it with `solver` and re-checks every reported
/// solution against all bounds and constraints.
///
/// The returned objective is recomputed from the column values so it does not
/// depend on backend bookkeeping.
pub fn solve(spec: &ModelSpec, params: &SolveParams, solver: &dyn Solver) -> Result<SolverResult> {
    spec.validate()?;
    let mut result = solver.solve_raw(spec, params)?;
    if !result.status.has_solution() {
        result.values = None;
        result.objective = None;
        return Ok(result);
    }
    let values = result
        .values
        .as_ref()
        .ok_or_else(|| Error::Environment(format!("{} reported a solution without values", solver.name())))?;
    if values.len() != spec.num_vars() {
        return Err(Error::Environment(format!(
            "{} returned {} values for {} variables",
            solver.name(),
            values.len(),
            spec.num_vars()
        )));
    }
    let (worst, label) = spec.max_violation(values);
    if !(worst <= params.feasibility_tol) {
        return Err(Error::Residual { label, residual: worst });
    }
    result.objective = Some(spec.objective_value(values));
    Ok(result)
}

/// Builds the elastic relaxation of `spec`: every constraint accepted by
/// `filter` gets non-negative slack columns, and the objective becomes the
/// total slack. Returns the relaxed model and `(constraint, slack vars)`.
pub fn elastic_copy(
    spec: &ModelSpec,
    filter: &dyn Fn(&Constraint) -> bool,
) -> (ModelSpec, Vec<(usize, Vec<VarId>)>) {
    let mut relaxed = ModelSpec::new();
    for v in &spec.variables {
        relaxed.add_var(v.name.clone(), v.kind, v.lower, v.upper);
    }
    let mut slacks = Vec::new();
    for (i, c) in spec.constraints.iter().enumerate() {
        let mut terms = c.terms.clone();
        if filter(c) {
            let mut vars = Vec::new();
            if c.sense != Sense::Ge {
                let s = relaxed.nonneg(format!("elastic_dn_{i}"));
                relaxed.add_objective(s, 1.0);
                terms.push((s, -1.0));
                vars.push(s);
            }
            if c.sense != Sense::Le {
                let s = relaxed.nonneg(format!("elastic_up_{i}"));
                relaxed.add_objective(s, 1.0);
                terms.push((s, 1.0));
                vars.push(s);
            }
            slacks.push((i, vars));
        }
        relaxed.add_constraint(c.label.clone(), terms, c.sense, c.rhs);
    }
    (relaxed, slacks)
}

/// Solves the elastic relaxation of an infeasible model and lists the
/// constraints that needed slack, largest first.
pub fn diagnose_infeasibility(
    spec: &ModelSpec,
    params: &SolveParams,
    solver: &dyn Solver,
    filter: &dyn Fn(&Constraint) -> bool,
) -> Result<Vec<Violation>> {
    let (relaxed, slacks) = elastic_copy(spec, filter);
    let result = solve(&relaxed, params, solver)?;
    if !result.status.has_solution() {
        return Err(Error::Solve {
            stage: "elastic diagnosis".to_string(),
            status: result.status,
        });
    }
    let mut out: Vec<Violation> = slacks
        .iter()
        .filter_map(|(row, vars)| {
            let amount: f64 = vars.iter().map(|&v| result.value(v)).sum();
            (amount > params.feasibility_tol).then(|| Violation {
                label: spec.constraints[*row].label.clone(),
                amount,
            })
        })
        .collect();
    out.sort_by(|a, b| b.amount.total_cmp(&a.amount).then_with(|| a.label.cmp(&b.label)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (ModelSpec, VarId, VarId) {
        let mut m = ModelSpec::new();
        let x = m.continuous("x", 0.0, 10.0);
        let b = m.binary("b");
        m.add_constraint("c1", vec![(x, 1.0), (b, -4.0)], Sense::Le, 0.0);
        m.add_constraint("c2", vec![(x, 1.0)], Sense::Ge, 3.0);
        m.add_objective(x, 1.0);
        m.add_objective(b, 2.0);
        (m, x, b)
    }

    #[test]
    fn duplicate_label_is_reported_by_validate() {
        let (mut m, x, _) = toy();
        m.add_constraint("c1", vec![(x, 1.0)], Sense::Le, 5.0);
        let err = m.validate().unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(ref s) if s.contains("duplicate constraint label")));
    }

    #[test]
    fn fix_binary_sets_equal_bounds() {
        let (m, _, b) = toy();
        let fixed = m.fix_variables(&[(b, 1.0)]).unwrap();
        let v = fixed.variable(b);
        assert_eq!((v.lower, v.upper), (1.0, 1.0));
    }

    #[test]
    fn fix_outside_bounds_is_rejected() {
        let (m, x, b) = toy();
        assert!(m.fix_variables(&[(x, 11.0)]).is_err());
        assert!(m.fix_variables(&[(b, 0.5)]).is_err());
    }

    #[test]
    fn max_violation_names_the_row() {
        let (m, _, _) = toy();
        let (viol, label) = m.max_violation(&[5.0, 0.0]);
        assert_eq!(label, "c1");
        assert!((viol - 5.0).abs() < 1e-12);
        let (viol, _) = m.max_violation(&[3.0, 1.0]);
        assert_eq!(viol, 0.0);
    }

    #[test]
    fn lp_export_is_deterministic_and_complete() {
        let (m, _, _) = toy();
        let a = m.to_lp();
        assert_eq!(a, m.clone().to_lp());
        assert!(a.contains(" c1: 1 x - 4 b <= 0"));
        assert!(a.contains("Binaries\n b\n"));
        assert!(a.ends_with("End\n"));
    }

    #[test]
    fn empty_model_exports() {
        let m = ModelSpec::new();
        assert!(m.validate().is_ok());
        assert!(m.to_lp().contains("Subject To"));
        assert!(m.to_mps().ends_with("ENDATA\n"));
    }

    #[test]
    fn mps_wraps_binaries_in_markers() {
        let (m, _, _) = toy();
        let mps = m.to_mps();
        assert!(mps.contains("'INTORG'"));
        assert!(mps.contains("'INTEND'"));
        assert!(mps.contains(" UP BND b 1"));
    }

    #[test]
    fn elastic_copy_adds_slack_per_side() {
        let (m, _, _) = toy();
        let (relaxed, slacks) = elastic_copy(&m, &|_| true);
        assert_eq!(slacks.len(), 2);
        assert_eq!(relaxed.num_vars(), m.num_vars() + 2);
    }
}
