//! Staged modeling pipeline around the `ormind-core` model and solver.
//!
//! A run sends a problem through parameter extraction, formalization, document
//! drafting and normalization, executes the document on every instance, then
//! revises it from solver diagnostics and counterfactual checks.

pub mod bench;
pub mod dataset;
pub mod fsutil;
pub mod llm;
pub mod pool;
pub mod prompts;
pub mod run;

pub use bench::{emit_report, run_benchmark, sweep_table, sweep_temperature, BenchError, BenchReport, BenchRow, BenchRun};
pub use dataset::{load_problems, Dataset, DatasetError, Expected, Instance, ProblemInput};
pub use run::{classify, follows_stage_order, solve_problem, Classification, RunConfig, RunOutcome, Stage, StepKind, Trace};
