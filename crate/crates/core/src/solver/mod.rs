//! Exact desk-scale solving of [`ModelIR`] instances and feasibility checking
//! of candidate assignments.

mod branch;
mod simplex;

use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Assignment, ModelIR, Sense, StandardForm};

pub use branch::solve_milp;
pub use simplex::BLAND_AFTER;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub pivot_limit: usize,
    pub node_limit: usize,
    /// User-facing feasibility epsilon for [`check_feasibility`].
    pub feasibility_eps: f64,
    /// Integrality tolerance inside branch-and-bound.
    pub integrality_tol: f64,
    /// Wall-clock limit per solve, in seconds. `None` disables the limit.
    pub time_limit_secs: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            pivot_limit: 50_000,
            node_limit: 100_000,
            feasibility_eps: 1e-2,
            integrality_tol: 1e-6,
            time_limit_secs: Some(10.0),
        }
    }
}

impl SolveOptions {
    pub(crate) fn deadline(&self, start: Instant) -> Option<Instant> {
        self.time_limit_secs
            .filter(|s| s.is_finite() && *s >= 0.0)
            .map(|s| start + Duration::from_secs_f64(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverFailure {
    PivotLimit,
    NodeLimit,
    TimeLimit,
    /// The reported optimum failed its own feasibility re-check.
    Numerical,
}

impl fmt::Display for SolverFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverFailure::PivotLimit => "pivot limit exhausted",
            SolverFailure::NodeLimit => "node limit exhausted",
            SolverFailure::TimeLimit => "time limit exceeded",
            SolverFailure::Numerical => "numerical failure: solution does not satisfy the model",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Error(SolverFailure),
}

impl SolveStatus {
    pub fn label(&self) -> String {
        match self {
            SolveStatus::Optimal => "Optimal".into(),
            SolveStatus::Infeasible => "Infeasible".into(),
            SolveStatus::Unbounded => "Unbounded".into(),
            SolveStatus::Error(f) => format!("Error({f})"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub pivots: usize,
    pub nodes: usize,
    /// Not serialized: kept out of traces so replays stay byte-identical.
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub assignment: Option<Assignment>,
    pub stats: SolveStats,
}

impl SolveResult {
    pub(crate) fn without_solution(status: SolveStatus, stats: SolveStats) -> Self {
        Self {
            status,
            objective: None,
            assignment: None,
            stats,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Solves the continuous problem given in standard form.
pub fn solve_lp(model: &StandardForm, opts: &SolveOptions) -> SolveResult {
    let start = Instant::now();
    let limits = simplex::LpLimits {
        pivot_limit: opts.pivot_limit,
        deadline: opts.deadline(start),
    };
    let (status, pivots) = simplex::solve_standard(model, &limits);
    let stats = SolveStats {
        pivots,
        nodes: 0,
        wall_time: start.elapsed(),
    };
    match status {
        simplex::LpStatus::Optimal { y, value } => SolveResult {
            status: SolveStatus::Optimal,
            objective: Some(model.original_objective(value)),
            assignment: Some(model.recover(&y)),
            stats,
        },
        simplex::LpStatus::Infeasible => SolveResult::without_solution(SolveStatus::Infeasible, stats),
        simplex::LpStatus::Unbounded => SolveResult::without_solution(SolveStatus::Unbounded, stats),
        simplex::LpStatus::Failed(f) => SolveResult::without_solution(SolveStatus::Error(f), stats),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    Constraint,
    LowerBound,
    UpperBound,
    Integrality,
}

/// A constraint, bound or integrality requirement missed by an assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Constraint name, or the variable name for bound/integrality violations.
    pub subject: String,
    pub achieved: f64,
    pub required: f64,
    pub sense: Sense,
    /// `achieved - required` for `<=`, `required - achieved` for `>=`,
    /// `|achieved - required|` for `=`; positive means violated.
    pub slack: f64,
}

impl Violation {
    fn new(kind: ViolationKind, subject: &str, achieved: f64, required: f64, sense: Sense) -> Self {
        Self {
            kind,
            subject: subject.to_string(),
            achieved,
            required,
            sense,
            slack: sense.violation(achieved, required),
        }
    }
}

/// Lists every constraint, bound and integrality requirement that
/// `assignment` misses by more than `eps`.
pub fn check_feasibility(model: &ModelIR, assignment: &Assignment, eps: f64) -> Result<Vec<Violation>> {
    let mut out = Vec::new();
    for c in &model.constraints {
        let v = Violation::new(ViolationKind::Constraint, &c.name, c.lhs.evaluate(assignment)?, c.rhs, c.sense);
        if v.slack > eps {
            out.push(v);
        }
    }
    for var in &model.variables {
        let value = *assignment
            .get(&var.name)
            .ok_or_else(|| crate::error::ModelError::MissingAssignment(var.name.clone()))?;
        if var.lower.is_finite() {
            let v = Violation::new(ViolationKind::LowerBound, &var.name, value, var.lower, Sense::Ge);
            if v.slack > eps {
                out.push(v);
            }
        }
        if var.upper.is_finite() {
            let v = Violation::new(ViolationKind::UpperBound, &var.name, value, var.upper, Sense::Le);
            if v.slack > eps {
                out.push(v);
            }
        }
    }
    for var in model.integer_variables() {
        let value = assignment[&var.name];
        let v = Violation::new(ViolationKind::Integrality, &var.name, value, value.round(), Sense::Eq);
        if v.slack > eps {
            out.push(v);
        }
    }
    Ok(out)
}
