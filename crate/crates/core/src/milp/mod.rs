//! Mixed-integer linear programs and an exact branch-and-bound solver.
//!
//! Models are built through [`MilpModel`] and solved through the
//! [`MilpSolver`] trait. [`BranchAndBound`] is the bundled backend: best-first
//! search with plunging, most-fractional branching and a bounded dual simplex
//! for the LP relaxations.

mod bnb;
mod lp_format;
mod simplex;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bnb::BranchAndBound;
pub use lp_format::write_lp;

/// Feasibility tolerance for constraints and variable bounds.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Distance from {0, 1} under which a binary counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Relative gap at which the search stops.
pub const RELATIVE_GAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which `values` violates this row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub sense: Sense,
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<(VarId, f64)>,
}

/// Size summary of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelStats {
    pub binaries: usize,
    pub continuous: usize,
    pub constraints: usize,
    pub nonzeros: usize,
}

impl MilpModel {
    pub fn new(sense: Sense) -> Self {
        MilpModel { sense, variables: Vec::new(), constraints: Vec::new(), objective: Vec::new() }
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_variable(Variable { name: name.into(), kind: VarKind::Binary, lower: 0.0, upper: 1.0 })
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_variable(Variable { name: name.into(), kind: VarKind::Continuous, lower, upper })
    }

    pub fn add_variable(&mut self, var: Variable) -> VarId {
        self.variables.push(var);
        VarId(self.variables.len() - 1)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) {
        self.constraints.push(Constraint { name: name.into(), terms, relation, rhs });
    }

    pub fn set_objective_coefficient(&mut self, var: VarId, coef: f64) {
        match self.objective.iter_mut().find(|(v, _)| *v == var) {
            Some(slot) => slot.1 = coef,
            None => self.objective.push((var, coef)),
        }
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn stats(&self) -> ModelStats {
        let binaries = self.variables.iter().filter(|v| v.kind == VarKind::Binary).count();
        ModelStats {
            binaries,
            continuous: self.variables.len() - binaries,
            constraints: self.constraints.len(),
            nonzeros: self.constraints.iter().map(|c| c.terms.len()).sum(),
        }
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Largest bound, row or integrality violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (var, &x) in self.variables.iter().zip(values) {
            worst = worst.max(var.lower - x).max(x - var.upper);
            if var.kind == VarKind::Binary {
                worst = worst.max(x.min(1.0 - x).max(0.0));
            }
        }
        for c in &self.constraints {
            worst = worst.max(c.violation(values));
        }
        worst
    }

    pub fn is_feasible(&self, values: &[f64]) -> bool {
        values.len() == self.variables.len() && self.max_violation(values) <= FEASIBILITY_TOL
    }

    /// Structural checks run before any solve.
    pub fn validate(&self) -> Result<(), MilpError> {
        let n = self.variables.len();
        for (k, var) in self.variables.iter().enumerate() {
            if var.lower.is_nan() || var.upper.is_nan() || var.lower > var.upper {
                return Err(MilpError::Malformed(format!("variable {k} ({}) has bounds [{}, {}]", var.name, var.lower, var.upper)));
            }
            if var.kind == VarKind::Binary && (var.lower != 0.0 || var.upper != 1.0) {
                return Err(MilpError::Malformed(format!("binary variable {} must have bounds [0, 1]", var.name)));
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(MilpError::Malformed(format!("constraint {} has non-finite rhs", c.name)));
            }
            for &(v, a) in &c.terms {
                if v.0 >= n {
                    return Err(MilpError::Malformed(format!("constraint {} references undeclared variable {}", c.name, v.0)));
                }
                if !a.is_finite() {
                    return Err(MilpError::Malformed(format!("constraint {} has a non-finite coefficient", c.name)));
                }
            }
        }
        for &(v, c) in &self.objective {
            if v.0 >= n || !c.is_finite() {
                return Err(MilpError::Malformed(format!("bad objective term on variable {}", v.0)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    FeasibleTimeout,
    Infeasible,
    TimeoutNoSolution,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleTimeout)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleTimeout => "feasible-timeout",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::TimeoutNoSolution => "timeout-no-solution",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SolveStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "optimal" => SolveStatus::Optimal,
            "feasible-timeout" => SolveStatus::FeasibleTimeout,
            "infeasible" => SolveStatus::Infeasible,
            "timeout-no-solution" => SolveStatus::TimeoutNoSolution,
            other => return Err(format!("unknown solve status `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: SolveStatus,
    /// One value per model variable; empty when no solution was found.
    pub values: Vec<f64>,
    pub objective: f64,
    /// Best proven bound on the optimum (in the model's sense).
    pub bound: f64,
    /// Relative optimality gap; 0 when optimal.
    pub gap: f64,
    pub solve_time: Duration,
    pub nodes: usize,
}

impl MilpSolution {
    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MilpError {
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("LP relaxation is unbounded")]
    Unbounded,
    #[error("numerical failure in the LP solver: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub time_limit: Option<Duration>,
    /// Candidate incumbent; used only if it is feasible for the model.
    pub warm_start: Option<Vec<f64>>,
}

impl SolveOptions {
    pub fn with_time_limit(limit: Duration) -> Self {
        SolveOptions { time_limit: Some(limit), warm_start: None }
    }
}

/// Any exact MILP backend.
pub trait MilpSolver {
    fn solve(&self, model: &MilpModel, options: &SolveOptions) -> Result<MilpSolution, MilpError>;
}

/// Solves with the bundled branch-and-bound backend.
pub fn solve(model: &MilpModel, time_limit: Option<Duration>) -> Result<MilpSolution, MilpError> {
    BranchAndBound::default().solve(model, &SolveOptions { time_limit, warm_start: None })
}

/// Relative gap between an incumbent and a bound, sense-agnostic.
pub(crate) fn relative_gap(incumbent: f64, bound: f64, sense: Sense) -> f64 {
    let diff = match sense {
        Sense::Maximize => bound - incumbent,
        Sense::Minimize => incumbent - bound,
    };
    if diff <= 0.0 {
        return 0.0;
    }
    if incumbent == 0.0 {
        return if diff <= 1e-12 { 0.0 } else { f64::INFINITY };
    }
    diff / incumbent.abs()
}
