//! Problem files: a description, optional parameter declarations and one or
//! more instances, each with input data and expected output.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::{Map, Value};
use thiserror::Error;

/// An expected answer: an objective (or variable) value, or infeasibility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Expected {
    Value(f64),
    Infeasible,
}

impl fmt::Display for Expected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expected::Value(v) => write!(f, "{v}"),
            Expected::Infeasible => f.write_str("Infeasible"),
        }
    }
}

impl Expected {
    fn from_json(v: &Value) -> Result<Self, String> {
        match v {
            Value::Number(n) => n.as_f64().map(Expected::Value).ok_or_else(|| format!("bad number {n}")),
            Value::String(s) if s.trim().eq_ignore_ascii_case("infeasible") => Ok(Expected::Infeasible),
            Value::String(s) => s
                .trim()
                .parse::<f64>()
                .map(Expected::Value)
                .map_err(|_| format!("unrecognized expected output {s:?}")),
            other => Err(format!("unrecognized expected output {other}")),
        }
    }
}

impl Serialize for Expected {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Expected::Value(v) => s.serialize_f64(*v),
            Expected::Infeasible => s.serialize_str("Infeasible"),
        }
    }
}

impl<'de> Deserialize<'de> for Expected {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Expected::from_json(&Value::deserialize(d)?).map_err(de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub symbol: String,
    #[serde(default)]
    pub definition: String,
    #[serde(default)]
    pub shape: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub input: BTreeMap<String, Value>,
    pub expected: Vec<Expected>,
}

impl Instance {
    /// Numeric bindings for the input data. Arrays are flattened with 0-based
    /// suffixes: `Demand_0`, `Capacity_1_2`. Booleans bind as 0/1; text is skipped.
    pub fn bindings(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (name, value) in &self.input {
            flatten(name, value, &mut out);
        }
        out
    }
}

fn flatten(name: &str, value: &Value, out: &mut BTreeMap<String, f64>) {
    match value {
        Value::Number(n) => {
            if let Some(v) = n.as_f64() {
                out.insert(name.to_string(), v);
            }
        }
        Value::Bool(b) => {
            out.insert(name.to_string(), if *b { 1.0 } else { 0.0 });
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                flatten(&format!("{name}_{i}"), item, out);
            }
        }
        _ => {}
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInput {
    pub id: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parameters: Vec<Parameter>,
    pub instances: Vec<Instance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FormatError {
    pub path: PathBuf,
    pub message: String,
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.message)
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no problems could be loaded from {path} ({} file errors)", errors.len())]
    EmptyDataset { path: PathBuf, errors: Vec<FormatError> },
}

#[derive(Debug, Clone)]
pub struct Dataset {
    /// Sorted by id.
    pub problems: Vec<ProblemInput>,
    pub errors: Vec<FormatError>,
}

fn parse_instance(v: &Value) -> Result<Instance, String> {
    let obj = v.as_object().ok_or("instance is not an object")?;
    let output = obj.get("output").ok_or("instance has no output")?;
    let expected = match output {
        Value::Array(items) => items.iter().map(Expected::from_json).collect::<Result<Vec<_>, _>>()?,
        single => vec![Expected::from_json(single)?],
    };
    if expected.is_empty() {
        return Err("instance output is empty".into());
    }
    let input = match obj.get("input") {
        Some(Value::Object(m)) => m.clone().into_iter().collect(),
        Some(_) => return Err("instance input is not an object".into()),
        None => obj
            .iter()
            .filter(|(k, _)| k.as_str() != "output")
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect(),
    };
    Ok(Instance { input, expected })
}

/// Normalizes one problem object in either data format.
pub fn parse_problem(id: &str, obj: &Map<String, Value>) -> Result<ProblemInput, String> {
    let description = obj
        .get("description")
        .and_then(Value::as_str)
        .map(str::trim)
        .filter(|d| !d.is_empty())
        .ok_or("missing or empty description")?
        .to_string();
    let parameters = match obj.get("parameters") {
        None => Vec::new(),
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| format!("parameters: {e}"))?,
    };
    let instances = match ["instances", "data", "cases"].iter().find_map(|k| obj.get(*k)) {
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| parse_instance(v).map_err(|e| format!("instances[{i}]: {e}")))
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err("instances is not a list".into()),
        None if obj.contains_key("output") => {
            let mut flat = obj.clone();
            for k in ["description", "parameters", "id"] {
                flat.remove(k);
            }
            vec![parse_instance(&Value::Object(flat))?]
        }
        None => Vec::new(),
    };
    if instances.is_empty() {
        return Err("problem has no instances".into());
    }
    let id = obj.get("id").and_then(Value::as_str).unwrap_or(id).to_string();
    Ok(ProblemInput {
        id,
        description,
        parameters,
        instances,
    })
}

fn load_file(path: &Path, problems: &mut Vec<ProblemInput>, errors: &mut Vec<FormatError>) {
    let err = |message: String| FormatError {
        path: path.to_path_buf(),
        message,
    };
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("problem");
    let value: Value = match fs::read_to_string(path)
        .map_err(|e| e.to_string())
        .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
    {
        Ok(v) => v,
        Err(e) => return errors.push(err(e)),
    };
    match value {
        Value::Object(obj) if obj.contains_key("description") => match parse_problem(stem, &obj) {
            Ok(p) => problems.push(p),
            Err(e) => errors.push(err(e)),
        },
        Value::Object(map) => {
            for (id, v) in &map {
                match v.as_object().ok_or_else(|| "not an object".to_string()).and_then(|o| parse_problem(id, o)) {
                    Ok(p) => problems.push(p),
                    Err(e) => errors.push(err(format!("{id}: {e}"))),
                }
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                let id = format!("{stem}-{i}");
                match v.as_object().ok_or_else(|| "not an object".to_string()).and_then(|o| parse_problem(&id, o)) {
                    Ok(p) => problems.push(p),
                    Err(e) => errors.push(err(format!("[{i}]: {e}"))),
                }
            }
        }
        _ => errors.push(err("expected a problem object or a collection of problems".into())),
    }
}

/// Loads a directory of `<id>.json` problem files or a single combined file.
/// Malformed files are collected as [`FormatError`]s; only an empty result fails.
pub fn load_problems(path: &Path) -> Result<Dataset, DatasetError> {
    let mut problems = Vec::new();
    let mut errors = Vec::new();
    if path.is_dir() {
        match fs::read_dir(path) {
            Ok(entries) => {
                let mut files: Vec<PathBuf> = entries
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
                    .collect();
                files.sort();
                for f in files {
                    load_file(&f, &mut problems, &mut errors);
                }
            }
            Err(e) => errors.push(FormatError {
                path: path.to_path_buf(),
                message: e.to_string(),
            }),
        }
    } else if path.is_file() {
        load_file(path, &mut problems, &mut errors);
    } else {
        errors.push(FormatError {
            path: path.to_path_buf(),
            message: "no such file or directory".into(),
        });
    }
    problems.sort_by(|a, b| a.id.cmp(&b.id));
    for w in problems.windows(2) {
        if w[0].id == w[1].id {
            errors.push(FormatError {
                path: path.to_path_buf(),
                message: format!("duplicate problem id {}", w[0].id),
            });
        }
    }
    problems.dedup_by(|a, b| a.id == b.id);
    if problems.is_empty() {
        return Err(DatasetError::EmptyDataset {
            path: path.to_path_buf(),
            errors,
        });
    }
    Ok(Dataset { problems, errors })
}
