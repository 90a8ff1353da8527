//! One pipeline run: parameter extraction, formalization, document drafting and
//! normalization, execution, then error-driven and counterfactual-driven revision.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use ormind_core::counterfactual::{analyze, derive_checks, diagnose_failure, Failure, FeedbackDoc, ModificationCheck};
use ormind_core::model::{
    extract_json_object, parse_constraint_with, parse_model_document_with, ModelIR, Scope, VarKind,
};
use ormind_core::solver::{solve_milp, SolveOptions, SolveResult, SolveStatus};
use ormind_core::ModelError;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::dataset::{Expected, Instance, ProblemInput};
use crate::llm::{count_transcript_units, CallKey, CallRecord, ChatClient, ChatRequest, LlmError, Message, TranscriptUnits, DEFAULT_MODEL};
use crate::pool::MemoryPool;
use crate::prompts;

/// Model-calling stages; the name is the fixture-key prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    SemanticEncoder,
    Formalization,
    ExecutiveCompiler,
    SupervisorForward,
    SupervisorBackward,
    Reasoner,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::SemanticEncoder => "SemanticEncoder",
            Stage::Formalization => "Formalization",
            Stage::ExecutiveCompiler => "ExecutiveCompiler",
            Stage::SupervisorForward => "SupervisorForward",
            Stage::SupervisorBackward => "SupervisorBackward",
            Stage::Reasoner => "Reasoner",
        }
    }
}

/// Steps of a run trace, in the order they may occur.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepKind {
    SemanticEncoder,
    Formalization,
    Compiler,
    SupervisorFwd,
    Execute,
    ReasonerErr,
    SupervisorBwd,
    ReasonerCF,
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Classification {
    Success,
    WrongAnswer,
    FormulationFailure,
    ExecutionFailure,
}

impl Classification {
    pub const ALL: [Classification; 4] = [
        Classification::Success,
        Classification::WrongAnswer,
        Classification::FormulationFailure,
        Classification::ExecutionFailure,
    ];
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Match tolerance against expected values: `|Δ| <= max(abs, rel·|expected|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-2, rel: 1e-4 }
    }
}

impl Tolerance {
    pub fn matches(&self, got: f64, expected: f64) -> bool {
        (got - expected).abs() <= self.abs.max(self.rel * expected.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub max_syntax_repairs: u32,
    pub max_cf_repairs: u32,
    pub temperature: f64,
    pub model_id: String,
    pub solver: SolveOptions,
    pub llm_reasoner_enabled: bool,
    pub tolerance: Tolerance,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            max_syntax_repairs: 1,
            max_cf_repairs: 1,
            temperature: 0.0,
            model_id: DEFAULT_MODEL.into(),
            solver: SolveOptions::default(),
            llm_reasoner_enabled: false,
            tolerance: Tolerance::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamInfo {
    #[serde(rename = "Type")]
    pub kind: String,
    #[serde(rename = "Definition")]
    pub definition: String,
}

pub type ParameterSet = BTreeMap<String, ParamInfo>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MathModelDraft {
    #[serde(rename = "VARIABLES")]
    pub variables_text: String,
    #[serde(rename = "CONSTRAINTS")]
    pub constraints_text: String,
    #[serde(rename = "OBJECTIVE")]
    pub objective_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StageError {
    #[error("{stage} output could not be parsed: {message}")]
    Parse { stage: &'static str, message: String },
    #[error("{stage} call failed: {source}")]
    Transport {
        stage: &'static str,
        #[source]
        source: LlmError,
    },
}

fn field<'a>(obj: &'a serde_json::Map<String, Value>, name: &str) -> Option<&'a Value> {
    obj.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v)
}

fn text_of(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Array(items) => items.iter().map(text_of).collect::<Option<Vec<_>>>().map(|v| v.join("\n")),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn json_object(text: &str) -> Result<serde_json::Map<String, Value>, String> {
    let body = extract_json_object(text).ok_or("no JSON object found")?;
    match serde_json::from_str::<Value>(body) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err("not a JSON object".into()),
        Err(e) => Err(e.to_string()),
    }
}

/// Parses the parameter-extraction answer: a nonempty map of name to type and definition.
pub fn parse_parameter_set(text: &str) -> Result<ParameterSet, String> {
    let obj = json_object(text)?;
    let mut out = ParameterSet::new();
    for (name, v) in obj {
        let info = match &v {
            Value::Object(m) => ParamInfo {
                kind: field(m, "Type").and_then(text_of).unwrap_or_default(),
                definition: field(m, "Definition").and_then(text_of).unwrap_or_default(),
            },
            other => ParamInfo {
                kind: text_of(other).unwrap_or_default(),
                definition: String::new(),
            },
        };
        out.insert(name, info);
    }
    if out.is_empty() {
        return Err("no parameters".into());
    }
    Ok(out)
}

/// Parses the formalization answer, which must carry all three fields.
pub fn parse_draft(text: &str) -> Result<MathModelDraft, String> {
    let obj = json_object(text)?;
    let get = |name: &str| {
        field(&obj, name)
            .and_then(text_of)
            .ok_or_else(|| format!("missing {name}"))
    };
    Ok(MathModelDraft {
        variables_text: get("VARIABLES")?,
        constraints_text: get("CONSTRAINTS")?,
        objective_text: get("OBJECTIVE")?,
    })
}

/// Splits a free-text constraint list at top-level commas, semicolons and newlines.
fn split_items(text: &str) -> Vec<String> {
    let mut items = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in text.chars() {
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            _ => {}
        }
        if depth <= 0 && matches!(ch, ',' | ';' | '\n') {
            items.push(std::mem::take(&mut cur));
        } else {
            cur.push(ch);
        }
    }
    items.push(cur);
    items
        .into_iter()
        .map(|s| strip_numbering(s.trim()).to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn strip_numbering(s: &str) -> &str {
    let digits = s.trim_start_matches(|c: char| c.is_ascii_digit());
    if digits.len() < s.len() {
        if let Some(rest) = digits.strip_prefix('.').or_else(|| digits.strip_prefix(')')) {
            return rest.trim_start();
        }
    }
    s.trim_start_matches(['-', '*', '•']).trim_start()
}

fn strip_trailing_comment(s: &str) -> Option<&str> {
    let s = s.trim_end();
    if !s.ends_with(')') {
        return None;
    }
    let mut depth = 0;
    for (i, ch) in s.char_indices().rev() {
        match ch {
            ')' => depth += 1,
            '(' => {
                depth -= 1;
                if depth == 0 {
                    return Some(s[..i].trim_end());
                }
            }
            _ => {}
        }
    }
    None
}

/// Checks for an executed model, taken from the formalization draft where it
/// parses against the model's variables: draft constraints replace the model's
/// own, and draft integrality declarations add to the model's. Items that do
/// not parse are skipped and reported.
pub fn reference_checks(
    draft: &MathModelDraft,
    model: &ModelIR,
    params: &BTreeMap<String, f64>,
) -> (Vec<ModificationCheck>, Vec<String>) {
    let vars = model.variable_names();
    let scope = Scope::with_params(&vars, params);
    let mut notes = Vec::new();

    let mut integer: BTreeSet<String> = BTreeSet::new();
    for item in split_items(&draft.variables_text) {
        let lower = item.to_ascii_lowercase();
        if lower.contains("integer") || lower.contains(" int") || lower.contains(":int") {
            for word in item.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_')) {
                if vars.contains(word) {
                    integer.insert(word.to_string());
                }
            }
        }
    }

    let mut constraints = Vec::new();
    for item in split_items(&draft.constraints_text) {
        let parsed = parse_constraint_with(&item, scope).or_else(|e| match strip_trailing_comment(&item) {
            Some(bare) if !bare.is_empty() => parse_constraint_with(bare, scope),
            _ => Err(e),
        });
        match parsed {
            Ok(mut c) => {
                c.name = format!("draft{}", constraints.len() + 1);
                constraints.push(c);
            }
            Err(e) => notes.push(format!("draft constraint `{item}` skipped: {e}")),
        }
    }
    if constraints.is_empty() {
        notes.push("no draft constraint applies; checking the executed model's constraints".into());
        constraints = model.constraints.clone();
    }

    let mut reference = model.clone();
    for v in &mut reference.variables {
        if integer.contains(&v.name) {
            v.kind = VarKind::Integer;
        }
    }
    reference.constraints = constraints;
    (derive_checks(&reference), notes)
}

/// Outcome of executing the current document on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRun {
    pub instance: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub result: Option<SolveResult>,
}

impl InstanceRun {
    fn failed(&self) -> bool {
        match &self.result {
            None => true,
            Some(r) => matches!(r.status, SolveStatus::Error(_) | SolveStatus::Unbounded),
        }
    }

    fn summary(&self) -> String {
        match (&self.model_error, &self.result) {
            (Some(e), _) => format!("instance {}: model error: {e}", self.instance),
            (None, Some(r)) => {
                let mut s = format!("instance {}: {}", self.instance, r.status.label());
                if let Some(obj) = r.objective {
                    s.push_str(&format!(" objective={obj}"));
                }
                if let Some(a) = &r.assignment {
                    for (k, v) in a {
                        s.push_str(&format!(" {k}={v}"));
                    }
                }
                s
            }
            (None, None) => format!("instance {}: not executed", self.instance),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub kind: StepKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub calls: Vec<CallRecord>,
    /// Content appended to the memory pool for this step.
    pub output: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub execution: Vec<InstanceRun>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<FeedbackDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_valid: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl TraceStep {
    fn new(kind: StepKind, output: impl Into<String>) -> Self {
        Self {
            kind,
            calls: Vec::new(),
            output: output.into(),
            execution: Vec::new(),
            feedback: None,
            report_valid: None,
            notes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Repairs {
    pub syntax: u32,
    pub counterfactual: u32,
}

/// Complete record of a run; contains no timing data, so replays serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub problem: String,
    pub model_id: String,
    pub temperature: f64,
    pub steps: Vec<TraceStep>,
    pub pool: MemoryPool,
    pub repairs: Repairs,
    pub classification: Classification,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_error: Option<String>,
    pub transcript: TranscriptUnits,
}

impl Trace {
    pub fn step_kinds(&self) -> Vec<StepKind> {
        self.steps.iter().map(|s| s.kind).collect()
    }

    pub fn calls(&self) -> impl Iterator<Item = &CallRecord> {
        self.steps.iter().flat_map(|s| s.calls.iter())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub classification: Classification,
    /// Final execution, one entry per instance; empty if nothing was executed.
    pub finals: Vec<InstanceRun>,
    /// Last model that parsed and validated, from the first instance that produced one.
    pub model: Option<ModelIR>,
    pub trace: Trace,
}

impl RunOutcome {
    pub fn final_result(&self) -> Option<&SolveResult> {
        self.finals.first().and_then(|r| r.result.as_ref())
    }

    pub fn objective(&self) -> Option<f64> {
        self.final_result().and_then(|r| r.objective)
    }
}

/// Does `steps` follow the stage order for the given repair caps? With
/// `allow_prefix`, a run that stopped early on a stage failure also passes.
pub fn follows_stage_order(steps: &[StepKind], max_syntax: u32, max_cf: u32, allow_prefix: bool) -> bool {
    use StepKind::*;
    let mut i = 0;
    let expect = |seq: &[StepKind], i: &mut usize| -> Option<bool> {
        for s in seq {
            match steps.get(*i) {
                None => return Some(allow_prefix),
                Some(k) if k == s => *i += 1,
                Some(_) => return Some(false),
            }
        }
        None
    };
    if let Some(done) = expect(&[SemanticEncoder, Formalization, Compiler, SupervisorFwd, Execute], &mut i) {
        return done;
    }
    for _ in 0..max_syntax {
        if steps.get(i) != Some(&ReasonerErr) {
            break;
        }
        if let Some(done) = expect(&[ReasonerErr, SupervisorBwd, Execute], &mut i) {
            return done;
        }
    }
    if let Some(done) = expect(&[ReasonerCF], &mut i) {
        return done;
    }
    for _ in 0..max_cf {
        if steps.get(i) != Some(&SupervisorBwd) {
            break;
        }
        if let Some(done) = expect(&[SupervisorBwd, Execute, ReasonerCF], &mut i) {
            return done;
        }
    }
    i == steps.len()
}

/// Does one instance's final execution match its expected output?
pub fn instance_matches(run: &InstanceRun, expected: &[Expected], model: Option<&ModelIR>, tol: Tolerance) -> bool {
    let Some(result) = &run.result else {
        return false;
    };
    match result.status {
        SolveStatus::Infeasible => expected == [Expected::Infeasible],
        SolveStatus::Optimal => {
            let Some(objective) = result.objective else {
                return false;
            };
            let mut got = vec![objective];
            if expected.len() > 1 {
                let (Some(model), Some(a)) = (model, &result.assignment) else {
                    return false;
                };
                got.extend(model.variables.iter().map(|v| a[&v.name]));
            }
            expected.len() <= got.len()
                && expected.iter().zip(&got).all(|(e, g)| match e {
                    Expected::Value(v) => tol.matches(*g, *v),
                    Expected::Infeasible => false,
                })
        }
        _ => false,
    }
}

/// Final classification, by precedence: no model ever validated; a final
/// execution failed (model error, solver error, unbounded); every instance
/// matches and the last counterfactual check passed; otherwise a wrong answer.
pub fn classify(
    model_validated: bool,
    finals: &[InstanceRun],
    instances: &[Instance],
    models: &[Option<ModelIR>],
    report_valid: bool,
    tol: Tolerance,
) -> Classification {
    if !model_validated {
        return Classification::FormulationFailure;
    }
    if finals.is_empty() || finals.iter().any(InstanceRun::failed) {
        return Classification::ExecutionFailure;
    }
    let all_match = finals.iter().zip(instances).enumerate().all(|(i, (run, inst))| {
        instance_matches(run, &inst.expected, models.get(i).and_then(Option::as_ref), tol)
    });
    if all_match && report_valid && finals.len() == instances.len() {
        Classification::Success
    } else {
        Classification::WrongAnswer
    }
}

/// Problem text given to the stages: the description plus declared parameters or input names.
pub fn problem_text(problem: &ProblemInput) -> String {
    let mut text = problem.description.clone();
    if !problem.parameters.is_empty() {
        text.push_str("\nParameters:");
        for p in &problem.parameters {
            let shape = if p.shape.is_empty() {
                "scalar".to_string()
            } else {
                format!("shape [{}]", p.shape.join(", "))
            };
            text.push_str(&format!("\n- {}: {} ({shape})", p.symbol, p.definition));
        }
    } else if let Some(first) = problem.instances.first() {
        if !first.input.is_empty() {
            let names: Vec<&str> = first.input.keys().map(String::as_str).collect();
            text.push_str(&format!("\nInput data: {}", names.join(", ")));
        }
    }
    text
}

struct Run<'a> {
    problem: &'a ProblemInput,
    config: &'a RunConfig,
    client: &'a dyn ChatClient,
    description: String,
    attempts: BTreeMap<Stage, u32>,
    steps: Vec<TraceStep>,
    pool: MemoryPool,
    repairs: Repairs,
    model_validated: bool,
    models: Vec<Option<ModelIR>>,
    finals: Vec<InstanceRun>,
    report_valid: bool,
}

impl<'a> Run<'a> {
    fn push(&mut self, step: TraceStep) {
        self.pool.append(step.kind.to_string(), step.output.clone());
        self.steps.push(step);
    }

    fn call(&mut self, stage: Stage, prompt: String, calls: &mut Vec<CallRecord>) -> Result<String, StageError> {
        let attempt = self.attempts.entry(stage).or_insert(0);
        let key = CallKey::new(stage.name(), self.problem.id.clone(), *attempt);
        *attempt += 1;
        let request = ChatRequest {
            model: self.config.model_id.clone(),
            temperature: self.config.temperature,
            messages: vec![Message::user(prompt.clone())],
        };
        let response = self
            .client
            .complete(&key, &request)
            .map_err(|source| StageError::Transport {
                stage: stage.name(),
                source,
            })?;
        calls.push(CallRecord {
            stage: stage.name().into(),
            attempt: key.attempt,
            prompt,
            response: response.content.clone(),
            usage: response.usage,
            retries: response.retries,
        });
        Ok(response.content)
    }

    /// A JSON-answer stage with one reprompt.
    fn json_stage<T>(
        &mut self,
        stage: Stage,
        kind: StepKind,
        prompt: String,
        parse: fn(&str) -> Result<T, String>,
    ) -> Result<T, StageError> {
        let mut calls = Vec::new();
        let mut last_err = String::new();
        let mut last_text = String::new();
        for reprompt in [false, true] {
            let p = if reprompt {
                format!("{prompt}{}", prompts::FORMAT_REMINDER)
            } else {
                prompt.clone()
            };
            let text = match self.call(stage, p, &mut calls) {
                Ok(t) => t,
                Err(e) => {
                    let mut step = TraceStep::new(kind, last_text);
                    step.calls = calls;
                    self.push(step);
                    return Err(e);
                }
            };
            match parse(&text) {
                Ok(v) => {
                    let mut step = TraceStep::new(kind, text);
                    step.calls = calls;
                    self.push(step);
                    return Ok(v);
                }
                Err(e) => {
                    last_err = e;
                    last_text = text;
                }
            }
        }
        let mut step = TraceStep::new(kind, last_text);
        step.calls = calls;
        step.notes.push(format!("unparseable after reprompt: {last_err}"));
        self.push(step);
        Err(StageError::Parse {
            stage: stage.name(),
            message: last_err,
        })
    }

    fn text_stage(&mut self, stage: Stage, kind: StepKind, prompt: String) -> Result<String, StageError> {
        let mut calls = Vec::new();
        let result = self.call(stage, prompt, &mut calls);
        let mut step = TraceStep::new(kind, result.as_deref().unwrap_or(""));
        step.calls = calls;
        self.push(step);
        result
    }

    fn execute(&mut self, document: &str) {
        let mut runs = Vec::with_capacity(self.problem.instances.len());
        let mut models = Vec::with_capacity(self.problem.instances.len());
        for (i, inst) in self.problem.instances.iter().enumerate() {
            match parse_model_document_with(document, &inst.bindings()) {
                Ok(model) => {
                    self.model_validated = true;
                    let result = solve_milp(&model, &self.config.solver);
                    runs.push(InstanceRun {
                        instance: i,
                        model_error: None,
                        result: Some(result),
                    });
                    models.push(Some(model));
                }
                Err(e) => {
                    runs.push(InstanceRun {
                        instance: i,
                        model_error: Some(e.to_string()),
                        result: None,
                    });
                    models.push(None);
                }
            }
        }
        let output = runs.iter().map(InstanceRun::summary).collect::<Vec<_>>().join("\n");
        let mut step = TraceStep::new(StepKind::Execute, output);
        step.execution = runs.clone();
        self.push(step);
        self.finals = runs;
        self.models = models;
    }

    fn execution_failed(&self) -> bool {
        self.finals.iter().any(InstanceRun::failed)
    }

    fn diagnose(&mut self, document: &str) -> FeedbackDoc {
        let failing = self.finals.iter().find(|r| r.failed()).expect("a failed instance");
        let doc = match &failing.result {
            Some(r) => diagnose_failure(Failure::Solver(&r.status), Some(document)),
            None => {
                let inst = &self.problem.instances[failing.instance];
                let err: ModelError = parse_model_document_with(document, &inst.bindings())
                    .expect_err("the instance failed to parse");
                diagnose_failure(Failure::Model(&err), Some(document))
            }
        };
        let mut step = TraceStep::new(StepKind::ReasonerErr, doc.to_string());
        step.feedback = Some(doc.clone());
        self.push(step);
        doc
    }

    fn counterfactual(&mut self, draft: &MathModelDraft, document: &str) -> Result<FeedbackDoc, StageError> {
        let eps = self.config.solver.feasibility_eps;
        let mut feedback = FeedbackDoc::default();
        let mut notes = Vec::new();
        let mut valid = true;
        let mut analyzed = 0;
        for run in &self.finals {
            let (Some(result), Some(Some(model))) = (&run.result, self.models.get(run.instance)) else {
                continue;
            };
            if !result.is_optimal() {
                continue;
            }
            analyzed += 1;
            let bindings = self.problem.instances[run.instance].bindings();
            let (checks, skipped) = reference_checks(draft, model, &bindings);
            notes.extend(skipped);
            match analyze(&checks, result, eps) {
                Ok(report) => {
                    valid &= report.solution_valid_without_changes;
                    for entry in report.needed() {
                        let text = entry.suggestion.clone().unwrap_or_default();
                        if !feedback.lines.iter().any(|l| l.id == entry.id && l.text == text) {
                            feedback.push(entry.id.clone(), text);
                        }
                    }
                }
                Err(e) => {
                    valid = false;
                    notes.push(format!("instance {}: analysis failed: {e}", run.instance));
                }
            }
        }
        if analyzed == 0 {
            notes.push("no optimal solution to analyze".into());
        }
        notes.dedup();

        let mut calls = Vec::new();
        if self.config.llm_reasoner_enabled && analyzed > 0 {
            let solution = self.finals.iter().map(InstanceRun::summary).collect::<Vec<_>>().join("\n");
            let values = BTreeMap::from([
                ("problem_description", self.description.as_str()),
                ("code_example", document),
                ("input_content", solution.as_str()),
            ]);
            let prompt = prompts::render(prompts::REASONER, &values).expect("reasoner template renders");
            match self.call(Stage::Reasoner, prompt, &mut calls) {
                Ok(text) => {
                    let text = text.trim();
                    if !text.is_empty() && !text.eq_ignore_ascii_case("none") {
                        feedback.push("Reasoner", text);
                    }
                }
                Err(e) => {
                    let mut step = TraceStep::new(StepKind::ReasonerCF, feedback.to_string());
                    step.calls = calls;
                    self.push(step);
                    return Err(e);
                }
            }
        }

        self.report_valid = valid;
        let mut step = TraceStep::new(StepKind::ReasonerCF, feedback.to_string());
        step.calls = calls;
        step.feedback = Some(feedback.clone());
        step.report_valid = Some(valid);
        step.notes = notes;
        self.push(step);
        Ok(feedback)
    }

    fn backward(&mut self, feedback: &FeedbackDoc, document: &str) -> Result<String, StageError> {
        let feedback = feedback.to_string();
        let values = BTreeMap::from([
            ("feedback", feedback.as_str()),
            ("attention", prompts::ATTENTION),
            ("problem_description", self.description.as_str()),
            ("previous_code", document),
        ]);
        let prompt = prompts::render(prompts::SUPERVISOR_BACKWARD, &values).expect("backward template renders");
        self.text_stage(Stage::SupervisorBackward, StepKind::SupervisorBwd, prompt)
    }

    fn run(&mut self) -> Result<(), StageError> {
        let comments = if self.pool.is_empty() {
            "none".to_string()
        } else {
            self.pool.entries().iter().map(|e| e.content.clone()).collect::<Vec<_>>().join("\n")
        };
        let description = self.description.clone();
        let prompt = prompts::render(
            prompts::SEMANTIC_ENCODER,
            &BTreeMap::from([("problem_example", description.as_str()), ("comment_text", comments.as_str())]),
        )
        .expect("encoder template renders");
        let params = self.json_stage(Stage::SemanticEncoder, StepKind::SemanticEncoder, prompt, parse_parameter_set)?;

        let params_text = serde_json::to_string_pretty(&params).expect("parameters serialize");
        let prompt = prompts::render(
            prompts::FORMALIZATION,
            &BTreeMap::from([("problem_description", description.as_str()), ("comments_text", params_text.as_str())]),
        )
        .expect("formalization template renders");
        let draft = self.json_stage(Stage::Formalization, StepKind::Formalization, prompt, parse_draft)?;

        let draft_text = serde_json::to_string_pretty(&draft).expect("draft serializes");
        let prompt = prompts::render(
            prompts::COMPILER,
            &BTreeMap::from([
                ("problem_description", description.as_str()),
                ("comments_text", draft_text.as_str()),
                ("format_spec", prompts::FORMAT_SPEC),
            ]),
        )
        .expect("compiler template renders");
        let candidate = self.text_stage(Stage::ExecutiveCompiler, StepKind::Compiler, prompt)?;

        let prompt = prompts::render(
            prompts::SUPERVISOR_FORWARD,
            &BTreeMap::from([
                ("comment_text", candidate.as_str()),
                ("code_example", prompts::CODE_EXAMPLE),
                ("attention", prompts::ATTENTION),
            ]),
        )
        .expect("forward template renders");
        let mut document = self.text_stage(Stage::SupervisorForward, StepKind::SupervisorFwd, prompt)?;
        self.execute(&document);

        while self.execution_failed() && self.repairs.syntax < self.config.max_syntax_repairs {
            let feedback = self.diagnose(&document);
            document = self.backward(&feedback, &document)?;
            self.repairs.syntax += 1;
            self.execute(&document);
        }

        let mut feedback = self.counterfactual(&draft, &document)?;
        while !feedback.is_empty() && self.repairs.counterfactual < self.config.max_cf_repairs {
            document = self.backward(&feedback, &document)?;
            self.repairs.counterfactual += 1;
            self.execute(&document);
            feedback = self.counterfactual(&draft, &document)?;
        }
        Ok(())
    }
}

/// Runs every stage for `problem` and classifies the result. Never fails:
/// stage failures are recorded in the trace and reflected in the classification.
pub fn solve_problem(problem: &ProblemInput, config: &RunConfig, client: &dyn ChatClient) -> RunOutcome {
    let mut run = Run {
        problem,
        config,
        client,
        description: problem_text(problem),
        attempts: BTreeMap::new(),
        steps: Vec::new(),
        pool: MemoryPool::new(),
        repairs: Repairs::default(),
        model_validated: false,
        models: Vec::new(),
        finals: Vec::new(),
        report_valid: false,
    };
    let stage_error = run.run().err().map(|e| e.to_string());
    // A run cut short after a model validated never reached acceptance.
    let classification = if stage_error.is_some() && run.model_validated {
        Classification::ExecutionFailure
    } else {
        classify(
            run.model_validated,
            &run.finals,
            &problem.instances,
            &run.models,
            run.report_valid,
            config.tolerance,
        )
    };
    let model = run.models.iter().flatten().next().cloned();
    let transcript = count_transcript_units(run.steps.iter().flat_map(|s| s.calls.iter()));
    let trace = Trace {
        problem: problem.id.clone(),
        model_id: config.model_id.clone(),
        temperature: config.temperature,
        steps: run.steps,
        pool: run.pool,
        repairs: run.repairs,
        classification,
        stage_error,
        transcript,
    };
    RunOutcome {
        classification,
        finals: run.finals,
        model,
        trace,
    }
}
