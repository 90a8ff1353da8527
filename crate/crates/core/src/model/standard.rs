//! Conversion of a [`ModelIR`] into equality standard form:
//! minimize `c·y + offset` subject to `A y = b`, `y >= 0`, `b >= 0`.

use serde::{Deserialize, Serialize};

use super::{Assignment, ModelIR, ObjSense, Sense};

/// How an original variable is recovered from standard-form columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VarMap {
    /// `x = offset + y[column]`
    Shifted { column: usize, offset: f64 },
    /// `x = offset - y[column]` (no finite lower bound)
    Mirrored { column: usize, offset: f64 },
    /// `x = y[pos] - y[neg]` (free variable)
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnOrigin {
    Structural(String),
    FreeNegative(String),
    Slack(String),
    Surplus(String),
    BoundSlack(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardForm {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// Constant added to `c·y` to give the (sign-adjusted) original objective.
    pub obj_offset: f64,
    /// True when the original objective was a maximization and was negated.
    pub negated: bool,
    pub columns: Vec<ColumnOrigin>,
    pub row_names: Vec<String>,
    /// Number of rows that come from model constraints (the rest are bound rows).
    pub structural_rows: usize,
    pub var_maps: Vec<(String, VarMap)>,
}

impl StandardForm {
    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn num_cols(&self) -> usize {
        self.c.len()
    }

    /// Maps a standard-form point back to the original variables.
    pub fn recover(&self, y: &[f64]) -> Assignment {
        self.var_maps
            .iter()
            .map(|(name, map)| {
                let value = match *map {
                    VarMap::Shifted { column, offset } => offset + y[column],
                    VarMap::Mirrored { column, offset } => offset - y[column],
                    VarMap::Split { pos, neg } => y[pos] - y[neg],
                };
                (name.clone(), value)
            })
            .collect()
    }

    /// Converts a standard-form objective value into the original model's sense.
    pub fn original_objective(&self, standard_value: f64) -> f64 {
        if self.negated {
            -standard_value
        } else {
            standard_value
        }
    }
}

/// Canonicalizes using the model's own variable bounds.
pub fn canonicalize(model: &ModelIR) -> StandardForm {
    let bounds: Vec<(f64, f64)> = model.variables.iter().map(|v| (v.lower, v.upper)).collect();
    canonicalize_with_bounds(model, &bounds)
}

/// Canonicalizes with per-variable bound overrides (used by branch-and-bound).
pub(crate) fn canonicalize_with_bounds(model: &ModelIR, bounds: &[(f64, f64)]) -> StandardForm {
    debug_assert_eq!(bounds.len(), model.variables.len());
    let mut columns = Vec::new();
    let mut var_maps = Vec::with_capacity(model.variables.len());
    // upper-bound rows: (column, y upper limit, variable name)
    let mut bound_rows = Vec::new();

    for (var, &(lower, upper)) in model.variables.iter().zip(bounds) {
        let map = if lower.is_finite() {
            let column = columns.len();
            columns.push(ColumnOrigin::Structural(var.name.clone()));
            if upper.is_finite() {
                bound_rows.push((column, upper - lower, var.name.clone()));
            }
            VarMap::Shifted { column, offset: lower }
        } else if upper.is_finite() {
            let column = columns.len();
            columns.push(ColumnOrigin::Structural(var.name.clone()));
            VarMap::Mirrored { column, offset: upper }
        } else {
            let pos = columns.len();
            columns.push(ColumnOrigin::Structural(var.name.clone()));
            columns.push(ColumnOrigin::FreeNegative(var.name.clone()));
            VarMap::Split { pos, neg: pos + 1 }
        };
        var_maps.push((var.name.clone(), map));
    }
    let lookup = |name: &str| -> VarMap {
        var_maps
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| *m)
            .expect("validated model references declared variables")
    };

    // Rows over structural columns, before slack columns are known.
    let structural_cols = columns.len();
    let mut rows: Vec<(Vec<f64>, Sense, f64, String)> = Vec::new();
    for c in &model.constraints {
        let mut row = vec![0.0; structural_cols];
        let mut rhs = c.rhs;
        for (name, &coef) in &c.lhs.terms {
            match lookup(name) {
                VarMap::Shifted { column, offset } => {
                    row[column] += coef;
                    rhs -= coef * offset;
                }
                VarMap::Mirrored { column, offset } => {
                    row[column] -= coef;
                    rhs -= coef * offset;
                }
                VarMap::Split { pos, neg } => {
                    row[pos] += coef;
                    row[neg] -= coef;
                }
            }
        }
        rows.push((row, c.sense, rhs, c.name.clone()));
    }
    let structural_rows = rows.len();
    for (column, limit, name) in &bound_rows {
        let mut row = vec![0.0; structural_cols];
        row[*column] = 1.0;
        rows.push((row, Sense::Le, *limit, format!("{name}.upper")));
    }

    // Slack / surplus columns.
    let mut a = Vec::with_capacity(rows.len());
    let mut b = Vec::with_capacity(rows.len());
    let mut row_names = Vec::with_capacity(rows.len());
    let extra: Vec<Option<(f64, ColumnOrigin)>> = rows
        .iter()
        .enumerate()
        .map(|(i, (_, sense, _, name))| match sense {
            Sense::Le if i >= structural_rows => Some((1.0, ColumnOrigin::BoundSlack(name.clone()))),
            Sense::Le => Some((1.0, ColumnOrigin::Slack(name.clone()))),
            Sense::Ge => Some((-1.0, ColumnOrigin::Surplus(name.clone()))),
            Sense::Eq => None,
        })
        .collect();
    let total_cols = structural_cols + extra.iter().flatten().count();
    let mut next_extra = structural_cols;
    for ((mut row, _, mut rhs, name), slack) in rows.into_iter().zip(extra) {
        row.resize(total_cols, 0.0);
        if let Some((sign, origin)) = slack {
            row[next_extra] = sign;
            columns.push(origin);
            next_extra += 1;
        }
        if rhs < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
            rhs = -rhs;
        }
        a.push(row);
        b.push(rhs);
        row_names.push(name);
    }

    // Objective.
    let negated = model.objective.sense == ObjSense::Maximize;
    let sign = if negated { -1.0 } else { 1.0 };
    let mut c = vec![0.0; total_cols];
    let mut obj_offset = sign * model.objective.expr.constant;
    for (name, &coef) in &model.objective.expr.terms {
        let coef = sign * coef;
        match lookup(name) {
            VarMap::Shifted { column, offset } => {
                c[column] += coef;
                obj_offset += coef * offset;
            }
            VarMap::Mirrored { column, offset } => {
                c[column] -= coef;
                obj_offset += coef * offset;
            }
            VarMap::Split { pos, neg } => {
                c[pos] += coef;
                c[neg] -= coef;
            }
        }
    }

    StandardForm {
        a,
        b,
        c,
        obj_offset,
        negated,
        columns,
        row_names,
        structural_rows,
        var_maps,
    }
}
