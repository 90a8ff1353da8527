//! The JSON model-exchange document.
//!
//! ```json
//! {"variables":   [{"name": "x", "kind": "integer", "lower": 0, "upper": "inf"}],
//!  "constraints": [{"name": "budget", "expr": "50*x <= 1000"}],
//!  "objective":   {"sense": "max", "expr": "100*x"}}
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Map, Value};

use super::parse::{parse_constraint_with, parse_linear_expr_with, Scope};
use super::{ModelIR, ObjSense, Objective, VarKind, VariableDef};
use crate::error::{ModelError, Result};

/// Locates the outermost JSON object in `text`, ignoring code fences and any
/// surrounding prose. Braces inside string literals are skipped.
pub fn extract_json_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, &b) in bytes[start..].iter().enumerate() {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..=start + offset]);
                }
            }
            _ => {}
        }
    }
    None
}

fn malformed(msg: impl Into<String>) -> ModelError {
    ModelError::DocumentMalformed(msg.into())
}

fn bound(value: Option<&Value>, default: f64, section: &str) -> Result<f64> {
    match value {
        None | Some(Value::Null) => Ok(default),
        Some(Value::Number(n)) => n
            .as_f64()
            .ok_or_else(|| malformed(format!("{section}: bound out of range"))),
        Some(Value::String(s)) => match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
            "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
            other => other
                .parse::<f64>()
                .map_err(|_| malformed(format!("{section}: bound `{s}` is not a number or \"inf\""))),
        },
        Some(other) => Err(malformed(format!("{section}: bound must be a number, got {other}"))),
    }
}

fn str_field<'v>(obj: &'v Map<String, Value>, key: &str, section: &str) -> Result<&'v str> {
    obj.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| malformed(format!("{section}: missing string field `{key}`")))
}

fn parse_variable(value: &Value, index: usize) -> Result<VariableDef> {
    let section = format!("variables[{index}]");
    let obj = value
        .as_object()
        .ok_or_else(|| malformed(format!("{section}: expected an object")))?;
    let name = str_field(obj, "name", &section)?.trim().to_string();
    let kind_text = obj
        .get("kind")
        .and_then(Value::as_str)
        .unwrap_or("continuous")
        .trim()
        .to_ascii_lowercase();
    let mut lower = bound(obj.get("lower"), 0.0, &section)?;
    let mut upper = bound(obj.get("upper"), f64::INFINITY, &section)?;
    let kind = match kind_text.as_str() {
        "integer" | "int" => VarKind::Integer,
        "continuous" | "real" | "float" => VarKind::Continuous,
        "binary" | "bool" | "boolean" => {
            lower = lower.max(0.0);
            upper = upper.min(1.0);
            VarKind::Integer
        }
        other => {
            return Err(ModelError::InvalidVariable {
                name,
                reason: format!("unknown kind `{other}`"),
            }
            .in_section(section))
        }
    };
    Ok(VariableDef {
        name,
        kind,
        lower,
        upper,
    })
}

/// Parses and validates an exchange document with no parameter bindings.
pub fn parse_model_document(text: &str) -> Result<ModelIR> {
    parse_model_document_with(text, &BTreeMap::new())
}

/// Parses an exchange document, substituting `params` for identifiers that are
/// not declared variables.
pub fn parse_model_document_with(text: &str, params: &BTreeMap<String, f64>) -> Result<ModelIR> {
    let body = extract_json_object(text).ok_or_else(|| malformed("no JSON object found"))?;
    let doc: Value = serde_json::from_str(body).map_err(|e| malformed(format!("invalid JSON: {e}")))?;
    let root = doc.as_object().ok_or_else(|| malformed("document is not an object"))?;

    let raw_vars = root
        .get("variables")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("missing `variables` array"))?;
    let variables = raw_vars
        .iter()
        .enumerate()
        .map(|(i, v)| parse_variable(v, i))
        .collect::<Result<Vec<_>>>()?;

    let names: BTreeSet<String> = variables.iter().map(|v| v.name.clone()).collect();
    let scope = Scope::with_params(&names, params);

    let raw_constraints = match root.get("constraints") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items.clone(),
        Some(_) => return Err(malformed("`constraints` must be an array")),
    };
    let mut constraints = Vec::with_capacity(raw_constraints.len());
    for (i, item) in raw_constraints.iter().enumerate() {
        let section = format!("constraints[{i}]");
        let (name, expr) = match item {
            Value::String(expr) => (None, expr.as_str()),
            Value::Object(obj) => (
                obj.get("name").and_then(Value::as_str),
                str_field(obj, "expr", &section)?,
            ),
            _ => return Err(malformed(format!("{section}: expected an object"))),
        };
        let mut c = parse_constraint_with(expr, scope).map_err(|e| e.in_section(section.clone()))?;
        c.name = match name.map(str::trim) {
            Some(n) if !n.is_empty() => n.to_string(),
            _ => format!("c{}", i + 1),
        };
        constraints.push(c);
    }

    let obj = root
        .get("objective")
        .and_then(Value::as_object)
        .ok_or_else(|| malformed("missing `objective` object"))?;
    let sense = match str_field(obj, "sense", "objective")?.trim().to_ascii_lowercase().as_str() {
        "min" | "minimize" | "minimise" => ObjSense::Minimize,
        "max" | "maximize" | "maximise" => ObjSense::Maximize,
        other => return Err(malformed(format!("objective: unknown sense `{other}`"))),
    };
    let expr = parse_linear_expr_with(str_field(obj, "expr", "objective")?, scope)
        .map_err(|e| e.in_section("objective"))?;

    ModelIR {
        variables,
        constraints,
        objective: Objective { sense, expr },
    }
    .validated()
}

fn bound_value(v: f64) -> Value {
    if v == f64::INFINITY {
        json!("inf")
    } else if v == f64::NEG_INFINITY {
        json!("-inf")
    } else {
        json!(v)
    }
}

/// Renders a model back into an exchange document.
pub fn render_model_document(model: &ModelIR) -> String {
    let variables: Vec<Value> = model
        .variables
        .iter()
        .map(|v| {
            json!({
                "name": v.name,
                "kind": match v.kind { VarKind::Integer => "integer", VarKind::Continuous => "continuous" },
                "lower": bound_value(v.lower),
                "upper": bound_value(v.upper),
            })
        })
        .collect();
    let constraints: Vec<Value> = model
        .constraints
        .iter()
        .map(|c| json!({"name": c.name, "expr": c.to_string()}))
        .collect();
    let doc = json!({
        "variables": variables,
        "constraints": constraints,
        "objective": {
            "sense": match model.objective.sense { ObjSense::Minimize => "min", ObjSense::Maximize => "max" },
            "expr": model.objective.expr.to_string(),
        },
    });
    serde_json::to_string_pretty(&doc).expect("model document serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const PHARMACY: &str = r#"{
      "variables": [
        {"name": "painkillers", "kind": "integer", "lower": 0, "upper": "inf"},
        {"name": "sleeping_pills", "kind": "integer", "lower": 0, "upper": "inf"}
      ],
      "constraints": [
        {"name": "min_painkillers", "expr": "painkillers >= 50"},
        {"name": "sleeping_share", "expr": "sleeping_pills >= 0.7*(painkillers + sleeping_pills)"},
        {"name": "morphine", "expr": "10*painkillers + 6*sleeping_pills <= 3000"}
      ],
      "objective": {"sense": "min", "expr": "3*painkillers + 5*sleeping_pills"}
    }"#;

    #[test]
    fn pharmacy_document() {
        let m = parse_model_document(PHARMACY).unwrap();
        assert_eq!(m.variables.len(), 2);
        assert_eq!(m.constraints.len(), 3);
        assert_eq!(m.objective.sense, ObjSense::Minimize);
        assert!(m.variables.iter().all(|v| v.kind == VarKind::Integer));
    }

    #[test]
    fn empty_model_is_valid() {
        let m = parse_model_document(r#"{"variables": [], "constraints": [], "objective": {"sense": "min", "expr": "0"}}"#)
            .unwrap();
        assert!(m.variables.is_empty() && m.constraints.is_empty());
    }

    #[test]
    fn undeclared_variable_names_the_section() {
        // constraints[1] mentions `z`, whose declaration is missing
        let faulty = PHARMACY.replace("0.7*(painkillers + sleeping_pills)", "0.7*(z + sleeping_pills)");
        let err = parse_model_document(&faulty).unwrap_err();
        assert_eq!(err.root(), &ModelError::UnknownVariable("z".into()));
        assert_eq!(err.section(), Some("constraints[1]"));
    }

    #[test]
    fn fences_and_prose_are_ignored() {
        let wrapped = format!("Here is the model:\n```json\n{PHARMACY}\n```\nDone.");
        assert_eq!(parse_model_document(&wrapped).unwrap(), parse_model_document(PHARMACY).unwrap());
    }

    #[test]
    fn braces_in_strings_do_not_confuse_extraction() {
        let text = r#"note {"a": "}{", "b": {"c": 1}} tail }"#;
        assert_eq!(extract_json_object(text), Some(r#"{"a": "}{", "b": {"c": 1}}"#));
        assert_eq!(extract_json_object("no braces"), None);
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let doc = r#"{"variables": [{"name": "x"}, {"name": "x"}], "objective": {"sense": "min", "expr": "x"}}"#;
        assert_eq!(parse_model_document(doc).unwrap_err().root(), &ModelError::DuplicateName("x".into()));
        let doc = r#"{"variables": [{"name": "x"}], "constraints": [{"name": "c2", "expr": "x <= 1"}, "x >= 0"],
                      "objective": {"sense": "min", "expr": "x"}}"#;
        assert_eq!(parse_model_document(doc).unwrap_err().root(), &ModelError::DuplicateName("c2".into()));
    }

    #[test]
    fn defaults_and_binary() {
        let doc = r#"{"variables": [{"name": "x"}, {"name": "b", "kind": "binary"}, {"name": "f", "lower": "-inf"}],
                      "constraints": ["x + b <= 3"], "objective": {"sense": "maximize", "expr": "x"}}"#;
        let m = parse_model_document(doc).unwrap();
        assert_eq!(m.variables[0].lower, 0.0);
        assert_eq!(m.variables[0].upper, f64::INFINITY);
        assert_eq!((m.variables[1].kind, m.variables[1].upper), (VarKind::Integer, 1.0));
        assert_eq!(m.variables[2].lower, f64::NEG_INFINITY);
        assert_eq!(m.constraints[0].name, "c1");
    }

    #[test]
    fn malformed_documents() {
        for doc in [
            "not json at all",
            "{\"variables\": 3}",
            "{\"variables\": [], \"objective\": {\"sense\": \"up\", \"expr\": \"0\"}}",
            "{\"variables\": []}",
            "{\"variables\": [{\"kind\": \"integer\"}], \"objective\": {\"sense\": \"min\", \"expr\": \"0\"}}",
        ] {
            assert!(
                matches!(parse_model_document(doc).unwrap_err().root(), ModelError::DocumentMalformed(_)),
                "{doc}"
            );
        }
    }

    #[test]
    fn render_reparses_identically() {
        let m = parse_model_document(PHARMACY).unwrap();
        assert_eq!(parse_model_document(&render_model_document(&m)).unwrap(), m);
    }
}
