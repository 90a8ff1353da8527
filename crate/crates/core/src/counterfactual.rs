//! Counterfactual solution checks.
//!
//! Instead of asking whether a candidate solution is feasible, each check asks
//! what would have to change for the candidate to be acceptable: which right-hand
//! side would have to move, and to what value, or which integrality requirement
//! would have to be dropped. The resulting suggestions feed the model-revision
//! step.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::error::ModelError;
use crate::model::{Assignment, Constraint, LinExpr, ModelIR, Sense};
use crate::solver::{SolveResult, SolveStatus};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CounterfactualError {
    #[error("solution status is {0}, expected Optimal")]
    StatusNotOptimal(String),
    #[error("report contains no needed modifications")]
    NoModificationsNeeded,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckKind {
    LowerBound,
    UpperBound,
    ResourceConstraint,
    RatioConstraint,
    IntegralityVar,
    IntegralityObj,
}

/// What a check evaluates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CheckRule {
    /// A variable bound declared on the variable itself.
    Bound { var: String, value: f64, sense: Sense },
    /// A model constraint, in normalized form.
    Constraint(Constraint),
    /// Every listed variable must be integral.
    IntegralVars(Vec<String>),
    /// The objective value must be integral.
    IntegralObjective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModificationCheck {
    /// `Modification<k>`, 1-based and sequential.
    pub id: String,
    pub kind: CheckKind,
    /// Constraint or variable name; `*` for whole-model integrality checks.
    pub subject: String,
    pub rule: CheckRule,
    /// Suggestion text; `{value}` is replaced by the achieved value to two decimals.
    pub message_template: String,
}

/// Result of evaluating one check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOutcome {
    pub holds: bool,
    /// Achieved left-hand side (or variable value) for bound/constraint checks.
    pub achieved: Option<f64>,
}

impl ModificationCheck {
    pub fn evaluate(&self, assignment: &Assignment, objective: f64, eps: f64) -> Result<CheckOutcome, ModelError> {
        let value_of = |name: &str| {
            assignment
                .get(name)
                .copied()
                .ok_or_else(|| ModelError::MissingAssignment(name.to_string()))
        };
        Ok(match &self.rule {
            CheckRule::Bound { var, value, sense } => {
                let achieved = value_of(var)?;
                CheckOutcome {
                    holds: sense.violation(achieved, *value) <= eps,
                    achieved: Some(achieved),
                }
            }
            CheckRule::Constraint(c) => {
                let achieved = c.lhs.evaluate(assignment)?;
                CheckOutcome {
                    holds: c.sense.violation(achieved, c.rhs) <= eps,
                    achieved: Some(achieved),
                }
            }
            CheckRule::IntegralVars(vars) => {
                let mut holds = true;
                for v in vars {
                    let x = value_of(v)?;
                    holds &= (x - x.round()).abs() <= eps;
                }
                CheckOutcome { holds, achieved: None }
            }
            CheckRule::IntegralObjective => CheckOutcome {
                holds: (objective - objective.round()).abs() <= eps,
                achieved: None,
            },
        })
    }

    fn message(&self, achieved: Option<f64>) -> String {
        match achieved {
            Some(v) => self.message_template.replace("{value}", &format!("{v:.2}")),
            None => self.message_template.clone(),
        }
    }
}

/// Shape of a share constraint `Σ target (sense) share · Σ (target ∪ rest)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioShape {
    pub share: f64,
    pub target: Vec<String>,
    pub all: Vec<String>,
}

/// Recognizes constraints whose normalized form is `a·Σ target + b·Σ rest (sense) 0`
/// with `a > 0 > b`, i.e. `Σ target (sense) share·Σ all` with `share = -b / (a - b)`.
pub fn ratio_shape(c: &Constraint) -> Option<RatioShape> {
    if c.rhs.abs() > 1e-12 || c.lhs.terms.len() < 2 {
        return None;
    }
    let pos: Vec<f64> = c.lhs.terms.values().copied().filter(|v| *v > 0.0).collect();
    let neg: Vec<f64> = c.lhs.terms.values().copied().filter(|v| *v < 0.0).collect();
    let (a, b) = (*pos.first()?, *neg.first()?);
    let same = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs());
    if !pos.iter().all(|v| same(*v, a)) || !neg.iter().all(|v| same(*v, b)) {
        return None;
    }
    let share = -b / (a - b);
    let target = c
        .lhs
        .terms
        .iter()
        .filter(|(_, v)| **v > 0.0)
        .map(|(k, _)| k.clone())
        .collect();
    Some(RatioShape {
        share,
        target,
        all: c.lhs.terms.keys().cloned().collect(),
    })
}

fn percent(share: f64) -> String {
    let text = format!("{:.2}", share * 100.0);
    text.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn constraint_check(c: &Constraint) -> (CheckKind, String) {
    if c.lhs.terms.len() == 1 {
        let (var, coef) = c.lhs.terms.iter().next().expect("one term");
        let kind = match (c.sense, *coef > 0.0) {
            (Sense::Ge, true) | (Sense::Le, false) => Some(CheckKind::LowerBound),
            (Sense::Le, true) | (Sense::Ge, false) => Some(CheckKind::UpperBound),
            (Sense::Eq, _) => None,
        };
        if let Some(kind) = kind {
            let template = if *coef == 1.0 {
                format!("Adjust constraint to allow {var} to be {{value}}")
            } else {
                format!("Adjust constraint to allow {} to be {{value}}", c.lhs)
            };
            return (kind, template);
        }
    }
    if let Some(shape) = ratio_shape(c) {
        let quantifier = match c.sense {
            Sense::Ge => "at least",
            Sense::Le => "at most",
            Sense::Eq => "exactly",
        };
        return (
            CheckKind::RatioConstraint,
            format!(
                "Adjust constraint to ensure {quantifier} {}% of the total ({}) is {}",
                percent(shape.share),
                shape.all.join(" + "),
                shape.target.join(" + ")
            ),
        );
    }
    (
        CheckKind::ResourceConstraint,
        format!("Modify resource constraint to allow {} to be {{value}}", c.lhs.terms_to_string()),
    )
}

fn objective_is_integral(model: &ModelIR) -> bool {
    let is_int = |v: f64| v == v.round();
    let expr: &LinExpr = &model.objective.expr;
    is_int(expr.constant)
        && expr
            .terms
            .iter()
            .all(|(name, coef)| is_int(*coef) && model.variable(name).is_some_and(|v| v.is_integer()))
}

/// Derives the check catalog for `model`: one check per finite variable bound,
/// one per constraint, one integrality check over all integer variables, and
/// an objective-integrality check when the objective is integral by construction.
pub fn derive_checks(model: &ModelIR) -> Vec<ModificationCheck> {
    let mut drafts: Vec<(CheckKind, String, CheckRule, String)> = Vec::new();
    for var in &model.variables {
        let template = format!("Adjust constraint to allow {} to be {{value}}", var.name);
        if var.lower.is_finite() {
            drafts.push((
                CheckKind::LowerBound,
                var.name.clone(),
                CheckRule::Bound {
                    var: var.name.clone(),
                    value: var.lower,
                    sense: Sense::Ge,
                },
                template.clone(),
            ));
        }
        if var.upper.is_finite() {
            drafts.push((
                CheckKind::UpperBound,
                var.name.clone(),
                CheckRule::Bound {
                    var: var.name.clone(),
                    value: var.upper,
                    sense: Sense::Le,
                },
                template,
            ));
        }
    }
    for c in &model.constraints {
        let (kind, template) = constraint_check(c);
        drafts.push((kind, c.name.clone(), CheckRule::Constraint(c.clone()), template));
    }
    let integers: Vec<String> = model.integer_variables().map(|v| v.name.clone()).collect();
    if !integers.is_empty() {
        drafts.push((
            CheckKind::IntegralityVar,
            "*".into(),
            CheckRule::IntegralVars(integers),
            "Remove integer constraint on variables".into(),
        ));
        if objective_is_integral(model) {
            drafts.push((
                CheckKind::IntegralityObj,
                "*".into(),
                CheckRule::IntegralObjective,
                "Remove integer constraint on objective".into(),
            ));
        }
    }
    drafts
        .into_iter()
        .enumerate()
        .map(|(i, (kind, subject, rule, message_template))| ModificationCheck {
            id: format!("Modification{}", i + 1),
            kind,
            subject,
            rule,
            message_template,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub id: String,
    pub kind: CheckKind,
    pub subject: String,
    pub modification_needed: bool,
    pub suggestion: Option<String>,
    /// Achieved left-hand side for bound/constraint checks.
    pub achieved: Option<f64>,
    /// Right-hand side under which this check would pass: the achieved value.
    pub suggested_rhs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualReport {
    pub entries: Vec<ReportEntry>,
    pub solution_valid_without_changes: bool,
}

impl CounterfactualReport {
    pub fn needed(&self) -> impl Iterator<Item = &ReportEntry> {
        self.entries.iter().filter(|e| e.modification_needed)
    }

    pub fn entry(&self, id: &str) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

/// Analyzes an Optimal solver result against `checks`.
pub fn analyze(
    checks: &[ModificationCheck],
    solution: &SolveResult,
    eps: f64,
) -> Result<CounterfactualReport, CounterfactualError> {
    match (&solution.status, &solution.assignment, solution.objective) {
        (SolveStatus::Optimal, Some(assignment), Some(objective)) => {
            analyze_point(checks, assignment, objective, eps)
        }
        (status, _, _) => Err(CounterfactualError::StatusNotOptimal(status.label())),
    }
}

/// Analyzes an arbitrary candidate point.
pub fn analyze_point(
    checks: &[ModificationCheck],
    assignment: &Assignment,
    objective: f64,
    eps: f64,
) -> Result<CounterfactualReport, CounterfactualError> {
    let mut entries = Vec::with_capacity(checks.len());
    for check in checks {
        let outcome = check.evaluate(assignment, objective, eps)?;
        let needed = !outcome.holds;
        entries.push(ReportEntry {
            id: check.id.clone(),
            kind: check.kind,
            subject: check.subject.clone(),
            modification_needed: needed,
            suggestion: needed.then(|| check.message(outcome.achieved)),
            achieved: outcome.achieved,
            suggested_rhs: if needed { outcome.achieved } else { None },
        });
    }
    let valid = entries.iter().all(|e| !e.modification_needed);
    Ok(CounterfactualReport {
        entries,
        solution_valid_without_changes: valid,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackLine {
    pub id: String,
    pub text: String,
}

/// Feedback handed to the model-revision step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackDoc {
    pub lines: Vec<FeedbackLine>,
    /// Failing artifact for failure diagnoses: `constraints[1]`, `objective`, `solver`, ...
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub section: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cause: Option<String>,
}

impl FeedbackDoc {
    pub fn push(&mut self, id: impl Into<String>, text: impl Into<String>) {
        self.lines.push(FeedbackLine {
            id: id.into(),
            text: text.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

impl fmt::Display for FeedbackDoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, line) in self.lines.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", line.id, line.text)?;
        }
        Ok(())
    }
}

/// One feedback line per needed modification, in check order.
pub fn report_to_feedback(report: &CounterfactualReport) -> Result<FeedbackDoc, CounterfactualError> {
    let mut doc = FeedbackDoc::default();
    for entry in report.needed() {
        doc.push(entry.id.clone(), entry.suggestion.clone().unwrap_or_default());
    }
    if doc.is_empty() {
        return Err(CounterfactualError::NoModificationsNeeded);
    }
    Ok(doc)
}

/// A failed execute step.
#[derive(Debug, Clone, Copy)]
pub enum Failure<'a> {
    /// The model document did not parse or validate.
    Model(&'a ModelError),
    /// The solver returned a non-optimal status.
    Solver(&'a SolveStatus),
}

fn constraint_detail(document: Option<&str>, section: &str) -> Option<String> {
    let index: usize = section.strip_prefix("constraints[")?.strip_suffix(']')?.parse().ok()?;
    let body = crate::model::extract_json_object(document?)?;
    let doc: Value = serde_json::from_str(body).ok()?;
    let item = doc.get("constraints")?.get(index)?;
    let expr = item.get("expr").and_then(Value::as_str).or_else(|| item.as_str())?;
    Some(match item.get("name").and_then(Value::as_str) {
        Some(name) => format!("constraint `{name}`: `{expr}`"),
        None => format!("constraint `{expr}`"),
    })
}

/// Names the failing artifact and a probable cause. `document` is the model
/// document that was executed, used to quote the offending constraint.
pub fn diagnose_failure(failure: Failure<'_>, document: Option<&str>) -> FeedbackDoc {
    let (section, cause, detail) = match failure {
        Failure::Model(err) => {
            let section = err.section().unwrap_or("document").to_string();
            let (cause, hint) = match err.root() {
                ModelError::Syntax { message, .. } => ("syntax error".to_string(), message.clone()),
                ModelError::Division { .. } => (
                    "division is not supported".to_string(),
                    "linear expressions do not support division; multiply by the reciprocal written as a decimal coefficient instead".to_string(),
                ),
                ModelError::UnknownVariable(name) => (
                    "unknown variable".to_string(),
                    format!("`{name}` is not declared in `variables` and is not a known parameter"),
                ),
                ModelError::MultipleRelations(n) => (
                    "multiple relation symbols".to_string(),
                    format!("found {n} relations; write each comparison as its own constraint"),
                ),
                ModelError::DocumentMalformed(msg) => ("malformed document".to_string(), msg.clone()),
                ModelError::DuplicateName(name) => ("duplicate name".to_string(), format!("`{name}` is declared twice")),
                ModelError::InvalidVariable { name, reason } => {
                    ("invalid variable".to_string(), format!("`{name}`: {reason}"))
                }
                ModelError::MissingAssignment(name) => ("missing value".to_string(), format!("no value for `{name}`")),
                ModelError::InSection { .. } => unreachable!("root() strips sections"),
            };
            let detail = match constraint_detail(document, &section) {
                Some(quote) => format!("{hint}; offending {quote}"),
                None => hint,
            };
            (section, cause, detail)
        }
        Failure::Solver(status) => {
            let (cause, detail) = match status {
                SolveStatus::Error(f) => (f.to_string(), "the solver gave up before proving optimality".to_string()),
                SolveStatus::Unbounded => (
                    "objective is unbounded".to_string(),
                    "a constraint or variable bound limiting the objective is probably missing".to_string(),
                ),
                SolveStatus::Infeasible => (
                    "model is infeasible".to_string(),
                    "constraints contradict each other; check directions and right-hand sides".to_string(),
                ),
                SolveStatus::Optimal => ("no failure".to_string(), "the solver reported an optimum".to_string()),
            };
            ("solver".to_string(), cause, detail)
        }
    };
    let mut doc = FeedbackDoc {
        lines: Vec::new(),
        section: Some(section.clone()),
        cause: Some(cause.clone()),
    };
    doc.push(section, format!("{cause} ({detail})"));
    doc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model_document;
    use crate::solver::{SolveStats, SolverFailure};

    fn assign(pairs: &[(&str, f64)]) -> Assignment {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn optimal(pairs: &[(&str, f64)], objective: f64) -> SolveResult {
        SolveResult {
            status: SolveStatus::Optimal,
            objective: Some(objective),
            assignment: Some(assign(pairs)),
            stats: SolveStats::default(),
        }
    }

    const PHARMACY: &str = r#"{
      "variables": [{"name": "painkillers", "kind": "integer"}, {"name": "sleeping_pills", "kind": "integer"}],
      "constraints": [{"name": "min_painkillers", "expr": "painkillers >= 50"},
                      {"name": "sleeping_share", "expr": "sleeping_pills >= 0.7*(painkillers + sleeping_pills)"},
                      {"name": "morphine", "expr": "10*painkillers + 6*sleeping_pills <= 3000"}],
      "objective": {"sense": "min", "expr": "3*painkillers + 5*sleeping_pills"}}"#;

    fn pharmacy() -> ModelIR {
        parse_model_document(PHARMACY).unwrap()
    }

    #[test]
    fn pharmacy_catalog_mirrors_seven_modifications() {
        let checks = derive_checks(&pharmacy());
        let kinds: Vec<_> = checks.iter().map(|c| c.kind).collect();
        assert_eq!(
            kinds,
            vec![
                CheckKind::LowerBound,
                CheckKind::LowerBound,
                CheckKind::LowerBound,
                CheckKind::RatioConstraint,
                CheckKind::ResourceConstraint,
                CheckKind::IntegralityVar,
                CheckKind::IntegralityObj,
            ]
        );
        let ids: Vec<_> = checks.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids.first(), Some(&"Modification1"));
        assert_eq!(ids.last(), Some(&"Modification7"));
    }

    #[test]
    fn bound_form_pharmacy_has_six_checks() {
        let doc = PHARMACY
            .replace(r#"{"name": "painkillers", "kind": "integer"}"#, r#"{"name": "painkillers", "kind": "integer", "lower": 50}"#)
            .replace(r#"{"name": "min_painkillers", "expr": "painkillers >= 50"},"#, "");
        let checks = derive_checks(&parse_model_document(&doc).unwrap());
        assert_eq!(checks.len(), 6);
        assert_eq!(checks[0].rule, CheckRule::Bound { var: "painkillers".into(), value: 50.0, sense: Sense::Ge });
    }

    #[test]
    fn continuous_fractional_model_has_no_integrality_checks() {
        let m = parse_model_document(
            r#"{"variables": [{"name": "x"}], "constraints": ["x <= 4"], "objective": {"sense": "max", "expr": "0.5*x"}}"#,
        )
        .unwrap();
        let kinds: Vec<_> = derive_checks(&m).iter().map(|c| c.kind).collect();
        assert_eq!(kinds, vec![CheckKind::LowerBound, CheckKind::UpperBound]);
    }

    #[test]
    fn two_constraint_example() {
        let m = parse_model_document(
            r#"{"variables": [{"name": "var1"}, {"name": "var2"}],
                "constraints": [{"name": "c1", "expr": "2*var1 + 3*var2 <= 100"}, {"name": "c2", "expr": "var1 + var2 <= 35"}],
                "objective": {"sense": "max", "expr": "3*var1 + 3*var2"}}"#,
        )
        .unwrap();
        let checks = derive_checks(&m);
        let subjects: Vec<_> = checks.iter().map(|c| c.subject.as_str()).collect();
        assert_eq!(subjects, vec!["var1", "var2", "c1", "c2"]);

        let report = analyze(&checks, &optimal(&[("var1", 30.0), ("var2", 20.0)], 150.0), 1e-2).unwrap();
        let c1 = report.entry("Modification3").unwrap();
        let c2 = report.entry("Modification4").unwrap();
        assert!(c1.modification_needed && c2.modification_needed);
        assert_eq!(
            c1.suggestion.as_deref(),
            Some("Modify resource constraint to allow 2*var1 + 3*var2 to be 120.00")
        );
        assert_eq!(c2.suggestion.as_deref(), Some("Modify resource constraint to allow var1 + var2 to be 50.00"));
        assert_eq!((c1.suggested_rhs, c2.suggested_rhs), (Some(120.0), Some(50.0)));

        let feedback = report_to_feedback(&report).unwrap();
        assert_eq!(feedback.lines.len(), 2);
        assert_eq!(feedback.lines[0].id, "Modification3");
        assert_eq!(feedback.lines[1].id, "Modification4");
    }

    #[test]
    fn pharmacy_intermediate_flags_only_the_share() {
        let report = analyze(
            &derive_checks(&pharmacy()),
            &optimal(&[("painkillers", 50.0), ("sleeping_pills", 0.0)], 150.0),
            1e-2,
        )
        .unwrap();
        let needed: Vec<_> = report.needed().collect();
        assert_eq!(needed.len(), 1);
        assert_eq!(needed[0].kind, CheckKind::RatioConstraint);
        let text = needed[0].suggestion.as_deref().unwrap();
        assert!(text.starts_with("Adjust constraint to ensure at least 70%"), "{text}");
        assert!(!report.solution_valid_without_changes);
        let feedback = report_to_feedback(&report).unwrap();
        assert_eq!(feedback.lines.len(), 1);
        assert!(feedback.to_string().contains("at least 70"));
    }

    #[test]
    fn optimal_solution_is_valid() {
        let report = analyze(
            &derive_checks(&pharmacy()),
            &optimal(&[("painkillers", 50.0), ("sleeping_pills", 117.0)], 735.0),
            1e-2,
        )
        .unwrap();
        assert!(report.solution_valid_without_changes);
        assert_eq!(report_to_feedback(&report), Err(CounterfactualError::NoModificationsNeeded));
    }

    #[test]
    fn non_optimal_status_is_rejected() {
        let r = SolveResult {
            status: SolveStatus::Infeasible,
            objective: None,
            assignment: None,
            stats: SolveStats::default(),
        };
        assert!(matches!(analyze(&[], &r, 1e-2), Err(CounterfactualError::StatusNotOptimal(_))));
    }

    #[test]
    fn fractional_solution_flags_integrality() {
        let report = analyze(
            &derive_checks(&pharmacy()),
            &optimal(&[("painkillers", 50.0), ("sleeping_pills", 116.6667)], 733.33),
            1e-2,
        )
        .unwrap();
        let kinds: Vec<_> = report.needed().map(|e| e.kind).collect();
        assert_eq!(kinds, vec![CheckKind::IntegralityVar, CheckKind::IntegralityObj]);
        assert_eq!(
            report.needed().next().unwrap().suggestion.as_deref(),
            Some("Remove integer constraint on variables")
        );
    }

    #[test]
    fn ratio_shape_recognizes_scaled_forms() {
        let m = parse_model_document(
            r#"{"variables": [{"name": "a"}, {"name": "b"}, {"name": "c"}],
                "constraints": ["3*a <= 1*(a + b + c)", "a - b >= 0", "2*a - b >= 0"],
                "objective": {"sense": "min", "expr": "0"}}"#,
        )
        .unwrap();
        let s = ratio_shape(&m.constraints[0]).unwrap();
        assert!((s.share - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.target, vec!["a".to_string()]);
        assert_eq!(ratio_shape(&m.constraints[1]).unwrap().share, 0.5);
        // 2a - b >= 0  <=>  a >= (1/3)(a + b)
        assert!((ratio_shape(&m.constraints[2]).unwrap().share - 1.0 / 3.0).abs() < 1e-12);
        let checks = derive_checks(&m);
        assert!(checks[3].message_template.contains("at most 33.33% of the total (a + b + c) is a"));
    }

    #[test]
    fn diagnose_unknown_variable_quotes_constraint() {
        let doc = PHARMACY.replace("0.7*(painkillers + sleeping_pills)", "0.7*(z + sleeping_pills)");
        let err = parse_model_document(&doc).unwrap_err();
        let fb = diagnose_failure(Failure::Model(&err), Some(&doc));
        assert_eq!(fb.section.as_deref(), Some("constraints[1]"));
        assert_eq!(fb.cause.as_deref(), Some("unknown variable"));
        assert!(fb.to_string().contains("sleeping_share"));
    }

    #[test]
    fn diagnose_solver_failures() {
        let fb = diagnose_failure(Failure::Solver(&SolveStatus::Error(SolverFailure::NodeLimit)), None);
        assert_eq!(fb.section.as_deref(), Some("solver"));
        assert_eq!(fb.cause.as_deref(), Some("node limit exhausted"));
        let fb = diagnose_failure(Failure::Solver(&SolveStatus::Unbounded), None);
        assert_eq!(fb.cause.as_deref(), Some("objective is unbounded"));
    }

    #[test]
    fn diagnose_division() {
        let doc = r#"{"variables": [{"name": "t0"}, {"name": "t1"}],
                      "constraints": [{"name": "hours", "expr": "t0 / 200 + t1 / 140 <= 40"}],
                      "objective": {"sense": "max", "expr": "25*t0 + 30*t1"}}"#;
        let err = parse_model_document(doc).unwrap_err();
        let fb = diagnose_failure(Failure::Model(&err), Some(doc));
        assert_eq!(fb.section.as_deref(), Some("constraints[0]"));
        assert_eq!(fb.cause.as_deref(), Some("division is not supported"));
        assert!(fb.to_string().contains("`hours`"));
    }
}
