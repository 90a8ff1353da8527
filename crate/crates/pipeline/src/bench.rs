//! Benchmark harness: runs problems concurrently and aggregates classifications.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Expected, ProblemInput};
use crate::fsutil::write_atomic;
use crate::llm::ChatClient;
use crate::run::{solve_problem, Classification, Repairs, RunConfig, Trace};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("temperatures must be strictly increasing, got {0:?}")]
    UnsortedTemperatures(Vec<f64>),
    #[error("cannot create client for temperature {temperature}: {message}")]
    Client { temperature: f64, message: String },
    #[error("cannot write report: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub id: String,
    pub classification: Classification,
    pub objective: Option<f64>,
    pub expected: Vec<Vec<Expected>>,
    pub repairs: Repairs,
    pub transcript_units: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_error: Option<String>,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub model_id: String,
    pub temperature: f64,
    pub n: usize,
    pub counts: BTreeMap<Classification, usize>,
    /// Success rate.
    pub sr: f64,
    /// Modeling-formulation failure rate.
    pub mffr: f64,
    /// Execution failure rate.
    pub iefr: f64,
    pub wrong_answer_rate: f64,
    /// Sorted by id.
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    fn from_rows(mut rows: Vec<BenchRow>, config: &RunConfig) -> Self {
        rows.sort_by(|a, b| a.id.cmp(&b.id));
        let n = rows.len();
        let mut counts: BTreeMap<Classification, usize> = Classification::ALL.iter().map(|c| (*c, 0)).collect();
        for r in &rows {
            *counts.entry(r.classification).or_default() += 1;
        }
        let rate = |c| counts[&c] as f64 / n as f64;
        Self {
            model_id: config.model_id.clone(),
            temperature: config.temperature,
            n,
            sr: rate(Classification::Success),
            mffr: rate(Classification::FormulationFailure),
            iefr: rate(Classification::ExecutionFailure),
            wrong_answer_rate: rate(Classification::WrongAnswer),
            counts,
            rows,
        }
    }

    /// Copy with wall times zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        let mut out = self.clone();
        for r in &mut out.rows {
            r.wall_time_ms = 0;
        }
        out
    }

    pub fn table(&self) -> String {
        format!(
            "model {} temperature {} (N = {})\n{}\n{}\n",
            self.model_id,
            self.temperature,
            self.n,
            "SR     | MFFR   | IEFR",
            rate_row(self)
        )
    }
}

fn pct(v: f64) -> String {
    format!("{:.1}%", v * 100.0)
}

fn rate_row(r: &BenchReport) -> String {
    format!("{} | {} | {}", pct(r.sr), pct(r.mffr), pct(r.iefr))
}

pub struct BenchRun {
    pub report: BenchReport,
    /// One per problem, in report row order.
    pub traces: Vec<Trace>,
}

/// Runs every problem on `workers` threads. Rows are ordered by id, so the
/// report does not depend on scheduling.
pub fn run_benchmark(
    problems: &[ProblemInput],
    client: &dyn ChatClient,
    config: &RunConfig,
    workers: usize,
) -> Result<BenchRun, BenchError> {
    if problems.is_empty() {
        return Err(BenchError::EmptyDataset);
    }
    let next = AtomicUsize::new(0);
    let done = Mutex::new(Vec::with_capacity(problems.len()));
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, problems.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(problem) = problems.get(i) else { break };
                let start = Instant::now();
                let outcome = solve_problem(problem, config, client);
                let row = BenchRow {
                    id: problem.id.clone(),
                    classification: outcome.classification,
                    objective: outcome.objective(),
                    expected: problem.instances.iter().map(|i| i.expected.clone()).collect(),
                    repairs: outcome.trace.repairs,
                    transcript_units: outcome.trace.transcript.total,
                    stage_error: outcome.trace.stage_error.clone(),
                    wall_time_ms: start.elapsed().as_millis() as u64,
                };
                log::info!("{}: {}", row.id, row.classification);
                done.lock().expect("results lock").push((row, outcome.trace));
            });
        }
    });
    let mut done = done.into_inner().expect("results lock");
    done.sort_by(|a, b| a.0.id.cmp(&b.0.id));
    let (rows, traces): (Vec<_>, Vec<_>) = done.into_iter().unzip();
    Ok(BenchRun {
        report: BenchReport::from_rows(rows, config),
        traces,
    })
}

/// One benchmark per temperature, in the given (strictly increasing) order.
/// `client_for` supplies the client used at each temperature.
pub fn sweep_temperature<F>(
    problems: &[ProblemInput],
    temperatures: &[f64],
    config: &RunConfig,
    workers: usize,
    mut client_for: F,
) -> Result<Vec<BenchRun>, BenchError>
where
    F: FnMut(f64) -> Result<Box<dyn ChatClient>, String>,
{
    if temperatures.is_empty() || temperatures.windows(2).any(|w| w[0] >= w[1]) || temperatures.iter().any(|t| !t.is_finite()) {
        return Err(BenchError::UnsortedTemperatures(temperatures.to_vec()));
    }
    if problems.is_empty() {
        return Err(BenchError::EmptyDataset);
    }
    let mut out = Vec::with_capacity(temperatures.len());
    for &temperature in temperatures {
        let client = client_for(temperature).map_err(|message| BenchError::Client { temperature, message })?;
        let cfg = RunConfig {
            temperature,
            ..config.clone()
        };
        out.push(run_benchmark(problems, client.as_ref(), &cfg, workers)?);
    }
    Ok(out)
}

/// Table of several reports, one row per temperature.
pub fn sweep_table(reports: &[&BenchReport]) -> String {
    let mut s = String::from("temperature | SR     | MFFR   | IEFR\n");
    for r in reports {
        s.push_str(&format!("{:<11} | {}\n", r.temperature, rate_row(r)));
    }
    s
}

/// Writes `report.json` and `report.txt` into `dir` and returns the table text.
pub fn emit_report(report: &BenchReport, dir: &Path) -> Result<String, BenchError> {
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    write_atomic(&dir.join("report.json"), json.as_bytes())?;
    let table = report.table();
    write_atomic(&dir.join("report.txt"), table.as_bytes())?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, c: Classification) -> BenchRow {
        BenchRow {
            id: id.into(),
            classification: c,
            objective: None,
            expected: vec![],
            repairs: Repairs::default(),
            transcript_units: 0,
            stage_error: None,
            wall_time_ms: 5,
        }
    }

    #[test]
    fn rates_are_counts_over_n() {
        let mut rows: Vec<BenchRow> = (0..8).map(|i| row(&format!("s{i}"), Classification::Success)).collect();
        rows.push(row("f", Classification::FormulationFailure));
        rows.push(row("e", Classification::ExecutionFailure));
        let r = BenchReport::from_rows(rows, &RunConfig::default());
        assert_eq!((r.sr, r.mffr, r.iefr, r.wrong_answer_rate), (0.8, 0.1, 0.1, 0.0));
        assert!(r.table().contains("80.0% | 10.0% | 10.0%"));
        assert_eq!(r.rows[0].id, "e");
        assert_eq!(r.without_timing().rows[0].wall_time_ms, 0);
    }
}
