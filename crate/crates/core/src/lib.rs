//! Model IR, exact solver and counterfactual checks for small linear and
//! integer optimization problems.

pub mod counterfactual;
pub mod error;
pub mod model;
pub mod solver;

pub use counterfactual::{
    analyze, analyze_point, derive_checks, diagnose_failure, report_to_feedback, CheckKind, CheckRule,
    CounterfactualError, CounterfactualReport, Failure, FeedbackDoc, FeedbackLine, ModificationCheck, ReportEntry,
};
pub use error::ModelError;
pub use model::{
    parse_constraint, parse_linear_expr, parse_model_document, Assignment, Constraint, LinExpr, ModelIR, ObjSense,
    Objective, Sense, VarKind, VariableDef,
};
pub use solver::{check_feasibility, solve_lp, solve_milp, SolveOptions, SolveResult, SolveStatus, SolverFailure};
