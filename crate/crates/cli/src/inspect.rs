use std::fmt::Write;

use ormind_pipeline::run::{StepKind, TraceStep};
use ormind_pipeline::Trace;

const EXCERPT_LINES: usize = 12;

fn section(kind: StepKind) -> &'static str {
    match kind {
        StepKind::SemanticEncoder => "Semantic Encoder",
        StepKind::Formalization => "Formalization",
        StepKind::Compiler => "Executive Compiler",
        StepKind::SupervisorFwd => "Supervisor (forward)",
        StepKind::Execute => "Execute",
        StepKind::ReasonerErr => "System 2 Reasoner (error diagnosis)",
        StepKind::SupervisorBwd => "Supervisor (backward)",
        StepKind::ReasonerCF => "System 2 Reasoner (counterfactual)",
    }
}

fn excerpt(text: &str) -> String {
    let lines: Vec<&str> = text.trim().lines().collect();
    let mut out: String = lines
        .iter()
        .take(EXCERPT_LINES)
        .map(|l| format!("  | {l}\n"))
        .collect();
    if lines.len() > EXCERPT_LINES {
        let _ = writeln!(out, "  | ... ({} more lines)", lines.len() - EXCERPT_LINES);
    }
    out
}

fn step(out: &mut String, index: usize, s: &TraceStep) {
    let _ = writeln!(out, "\n[{}] {}", index + 1, section(s.kind));
    for call in &s.calls {
        let _ = writeln!(
            out,
            "  call {}/{} ({} retries, {} units)",
            call.stage,
            call.attempt,
            call.retries,
            call.units()
        );
    }
    match s.kind {
        StepKind::Execute => {
            for run in &s.execution {
                match (&run.model_error, &run.result) {
                    (Some(e), _) => {
                        let _ = writeln!(out, "  instance {}: model error: {e}", run.instance);
                    }
                    (None, Some(r)) => {
                        let obj = r.objective.map(|o| format!(", objective {o}")).unwrap_or_default();
                        let _ = writeln!(
                            out,
                            "  instance {}: {}{obj} ({} pivots, {} nodes)",
                            run.instance,
                            r.status.label(),
                            r.stats.pivots,
                            r.stats.nodes
                        );
                        if let Some(a) = &r.assignment {
                            let values: Vec<String> = a.iter().map(|(k, v)| format!("{k} = {v}")).collect();
                            let _ = writeln!(out, "    {}", values.join(", "));
                        }
                    }
                    (None, None) => {}
                }
            }
        }
        StepKind::ReasonerErr | StepKind::ReasonerCF => {
            match &s.feedback {
                Some(f) if !f.is_empty() => {
                    for line in &f.lines {
                        let _ = writeln!(out, "  {}: {}", line.id, line.text);
                    }
                }
                _ => {
                    let _ = writeln!(out, "  no modifications needed");
                }
            }
            if let Some(valid) = s.report_valid {
                let _ = writeln!(out, "  solution valid without changes: {valid}");
            }
        }
        _ => out.push_str(&excerpt(&s.output)),
    }
    for note in &s.notes {
        let _ = writeln!(out, "  note: {note}");
    }
}

/// Stage-by-stage account of a run trace.
pub fn narrative(trace: &Trace) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Problem {} (model {}, temperature {})",
        trace.problem, trace.model_id, trace.temperature
    );
    for (i, s) in trace.steps.iter().enumerate() {
        step(&mut out, i, s);
    }
    let _ = writeln!(out, "\nClassification: {}", trace.classification);
    let _ = writeln!(
        out,
        "Repairs: syntax {}, counterfactual {}",
        trace.repairs.syntax, trace.repairs.counterfactual
    );
    if let Some(e) = &trace.stage_error {
        let _ = writeln!(out, "Stopped early: {e}");
    }
    let _ = writeln!(out, "Transcript units: {}", trace.transcript.total);
    out
}
