//! Structured optimization model: variables with bounds and integrality,
//! linear constraints and a linear objective.

mod document;
mod parse;
pub(crate) mod standard;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

pub use document::{extract_json_object, parse_model_document, parse_model_document_with, render_model_document};
pub use parse::{parse_constraint, parse_constraint_with, parse_linear_expr, parse_linear_expr_with, Scope};
pub use standard::{canonicalize, ColumnOrigin, StandardForm, VarMap};

/// Coefficients with magnitude below this are dropped during normalization.
pub const COEF_ZERO: f64 = 1e-12;

/// Variable assignment keyed by variable name.
pub type Assignment = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Integer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableDef {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

impl VariableDef {
    pub fn new(name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            kind,
            lower,
            upper,
        }
    }

    pub fn is_integer(&self) -> bool {
        self.kind == VarKind::Integer
    }
}

/// Returns true when `name` is a valid identifier: `[A-Za-z_][A-Za-z0-9_]*`.
pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A linear expression `Σ coef·var + constant`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr {
    pub terms: BTreeMap<String, f64>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(value: f64) -> Self {
        Self {
            terms: BTreeMap::new(),
            constant: value,
        }
    }

    pub fn var(name: impl Into<String>) -> Self {
        Self::term(name, 1.0)
    }

    pub fn term(name: impl Into<String>, coef: f64) -> Self {
        let mut expr = Self::default();
        expr.add_term(name.into(), coef);
        expr
    }

    pub fn from_terms<I, S>(terms: I, constant: f64) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut expr = Self::constant(constant);
        for (name, coef) in terms {
            expr.add_term(name.into(), coef);
        }
        expr
    }

    /// Adds `coef·name`, merging with an existing term and dropping it if it cancels.
    pub fn add_term(&mut self, name: String, coef: f64) {
        use std::collections::btree_map::Entry;
        match self.terms.entry(name) {
            Entry::Vacant(slot) => {
                if coef.abs() >= COEF_ZERO {
                    slot.insert(coef);
                }
            }
            Entry::Occupied(mut slot) => {
                let merged = *slot.get() + coef;
                if merged.abs() < COEF_ZERO {
                    slot.remove();
                } else {
                    *slot.get_mut() = merged;
                }
            }
        }
    }

    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) {
        for (name, coef) in &other.terms {
            self.add_term(name.clone(), coef * scale);
        }
        self.constant += other.constant * scale;
    }

    pub fn scaled(&self, scale: f64) -> LinExpr {
        let mut out = LinExpr::default();
        out.add_scaled(self, scale);
        out
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coef(&self, name: &str) -> f64 {
        self.terms.get(name).copied().unwrap_or(0.0)
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.terms.keys().map(String::as_str)
    }

    /// `Σ coef·value + constant`.
    pub fn evaluate(&self, assignment: &Assignment) -> Result<f64> {
        let mut total = self.constant;
        for (name, coef) in &self.terms {
            let value = assignment
                .get(name)
                .ok_or_else(|| ModelError::MissingAssignment(name.clone()))?;
            total += coef * value;
        }
        Ok(total)
    }

    /// Renders the variable part only (no constant); `0` when empty.
    pub fn terms_to_string(&self) -> String {
        LinExpr {
            terms: self.terms.clone(),
            constant: 0.0,
        }
        .to_string()
    }
}

/// Free-function form of [`LinExpr::evaluate`].
pub fn evaluate(expr: &LinExpr, assignment: &Assignment) -> Result<f64> {
    expr.evaluate(assignment)
}

fn write_coef_term(f: &mut fmt::Formatter<'_>, first: bool, coef: f64, name: &str) -> fmt::Result {
    let magnitude = coef.abs();
    match (first, coef < 0.0) {
        (true, true) => write!(f, "-")?,
        (true, false) => {}
        (false, true) => write!(f, " - ")?,
        (false, false) => write!(f, " + ")?,
    }
    if magnitude == 1.0 {
        write!(f, "{name}")
    } else {
        write!(f, "{magnitude}*{name}")
    }
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (name, coef) in &self.terms {
            write_coef_term(f, first, *coef, name)?;
            first = false;
        }
        if first {
            return write!(f, "{}", self.constant);
        }
        if self.constant != 0.0 {
            let sign = if self.constant < 0.0 { '-' } else { '+' };
            write!(f, " {sign} {}", self.constant.abs())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }

    /// Signed violation amount: positive means `achieved` violates the relation.
    pub fn violation(self, achieved: f64, required: f64) -> f64 {
        match self {
            Sense::Le => achieved - required,
            Sense::Ge => required - achieved,
            Sense::Eq => (achieved - required).abs(),
        }
    }
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// `lhs sense rhs`, normalized so that `lhs.constant == 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub lhs: LinExpr,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    /// Builds a normalized constraint from `lhs sense rhs` where both sides are expressions.
    pub fn from_sides(name: impl Into<String>, lhs: &LinExpr, sense: Sense, rhs: &LinExpr) -> Self {
        let mut diff = lhs.clone();
        diff.add_scaled(rhs, -1.0);
        let rhs_value = -diff.constant;
        diff.constant = 0.0;
        Self {
            name: name.into(),
            lhs: diff,
            sense,
            rhs: rhs_value,
        }
    }

    pub fn new(name: impl Into<String>, lhs: LinExpr, sense: Sense, rhs: f64) -> Self {
        Self::from_sides(name, &lhs, sense, &LinExpr::constant(rhs))
    }

    /// Signed violation at `assignment` (positive = violated).
    pub fn violation(&self, assignment: &Assignment) -> Result<f64> {
        Ok(self.sense.violation(self.lhs.evaluate(assignment)?, self.rhs))
    }

    pub fn is_satisfied(&self, assignment: &Assignment, eps: f64) -> Result<bool> {
        Ok(self.violation(assignment)? <= eps)
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.sense, self.rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjSense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub sense: ObjSense,
    pub expr: LinExpr,
}

/// A validated linear / mixed-integer model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelIR {
    pub variables: Vec<VariableDef>,
    pub constraints: Vec<Constraint>,
    pub objective: Objective,
}

impl ModelIR {
    /// Checks every structural invariant and returns the model unchanged when it holds.
    pub fn validated(self) -> Result<Self> {
        let mut names = BTreeSet::new();
        for (i, var) in self.variables.iter().enumerate() {
            let section = format!("variables[{i}]");
            if !is_identifier(&var.name) {
                return Err(ModelError::InvalidVariable {
                    name: var.name.clone(),
                    reason: "not a valid identifier".into(),
                }
                .in_section(section));
            }
            if !names.insert(var.name.as_str()) {
                return Err(ModelError::DuplicateName(var.name.clone()).in_section(section));
            }
            if var.lower.is_nan() || var.upper.is_nan() || var.lower > var.upper {
                return Err(ModelError::InvalidVariable {
                    name: var.name.clone(),
                    reason: format!("lower bound {} exceeds upper bound {}", var.lower, var.upper),
                }
                .in_section(section));
            }
            if var.lower == f64::INFINITY || var.upper == f64::NEG_INFINITY {
                return Err(ModelError::InvalidVariable {
                    name: var.name.clone(),
                    reason: "bounds leave no finite value".into(),
                }
                .in_section(section));
            }
        }
        let mut constraint_names = BTreeSet::new();
        for (i, c) in self.constraints.iter().enumerate() {
            let section = format!("constraints[{i}]");
            if !constraint_names.insert(c.name.as_str()) {
                return Err(ModelError::DuplicateName(c.name.clone()).in_section(section));
            }
            check_declared(&c.lhs, &names).map_err(|e| e.in_section(section.clone()))?;
            if !c.rhs.is_finite() || c.lhs.terms.values().any(|v| !v.is_finite()) {
                return Err(ModelError::DocumentMalformed("non-finite coefficient".into()).in_section(section));
            }
        }
        check_declared(&self.objective.expr, &names).map_err(|e| e.in_section("objective"))?;
        Ok(self)
    }

    pub fn variable(&self, name: &str) -> Option<&VariableDef> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn variable_names(&self) -> BTreeSet<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn integer_variables(&self) -> impl Iterator<Item = &VariableDef> {
        self.variables.iter().filter(|v| v.is_integer())
    }

    /// Objective value at `assignment`, in the model's own sense.
    pub fn objective_value(&self, assignment: &Assignment) -> Result<f64> {
        self.objective.expr.evaluate(assignment)
    }
}

fn check_declared(expr: &LinExpr, names: &BTreeSet<&str>) -> Result<()> {
    match expr.variables().find(|v| !names.contains(v)) {
        Some(unknown) => Err(ModelError::UnknownVariable(unknown.to_string())),
        None => Ok(()),
    }
}
