use std::path::{Path, PathBuf};

use ormind_pipeline::llm::{ChatClient, ReplayClient};
use ormind_pipeline::{emit_report, load_problems, run_benchmark, sweep_temperature, BenchError, Classification, ProblemInput, RunConfig};

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn problems() -> Vec<ProblemInput> {
    load_problems(&corpus().join("problems")).unwrap().problems
}

fn replay(dir: &Path) -> Result<Box<dyn ChatClient>, String> {
    ReplayClient::from_dir(dir)
        .map(|c| Box::new(c) as Box<dyn ChatClient>)
        .map_err(|e| e.to_string())
}

/// Copy of the corpus fixtures in which the orchard model has the right yield.
fn corrected_fixtures() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(corpus().join("fixtures")).unwrap() {
        let path = entry.unwrap().path();
        let mut text = std::fs::read_to_string(&path).unwrap();
        if path.file_stem().unwrap() == "orchard" {
            text = text.replace("2*apples + 3*pears\\\"", "4*apples + 3*pears\\\"");
        }
        std::fs::write(dir.path().join(path.file_name().unwrap()), text).unwrap();
    }
    dir
}

#[test]
fn degenerate_sweep_equals_single_benchmark() {
    let fixtures = corpus().join("fixtures");
    let config = RunConfig::default();
    let sweep = sweep_temperature(&problems(), &[0.0], &config, 2, |_| replay(&fixtures)).unwrap();
    let single = run_benchmark(&problems(), replay(&fixtures).unwrap().as_ref(), &config, 2).unwrap();
    assert_eq!(sweep.len(), 1);
    assert_eq!(sweep[0].report.without_timing(), single.report.without_timing());
}

#[test]
fn sweep_routes_each_temperature_to_its_fixtures() {
    let base = corpus().join("fixtures");
    let corrected = corrected_fixtures();
    let runs = sweep_temperature(&problems(), &[0.0, 0.7], &RunConfig::default(), 4, |t| {
        if t == 0.0 {
            replay(&base)
        } else {
            replay(corrected.path())
        }
    })
    .unwrap();
    assert_eq!(runs[0].report.temperature, 0.0);
    assert_eq!(runs[1].report.temperature, 0.7);
    assert_eq!(runs[0].report.counts[&Classification::Success], 8);
    assert_eq!(runs[1].report.counts[&Classification::Success], 9);
    assert_eq!(runs[1].report.counts[&Classification::WrongAnswer], 0);
}

#[test]
fn sweep_rejects_unsorted_temperatures() {
    let fixtures = corpus().join("fixtures");
    for temps in [vec![0.7, 0.0], vec![0.3, 0.3], vec![]] {
        let r = sweep_temperature(&problems(), &temps, &RunConfig::default(), 1, |_| replay(&fixtures));
        assert!(matches!(r, Err(BenchError::UnsortedTemperatures(_))));
    }
}

#[test]
fn empty_dataset_is_rejected() {
    let fixtures = corpus().join("fixtures");
    let r = run_benchmark(&[], replay(&fixtures).unwrap().as_ref(), &RunConfig::default(), 1);
    assert!(matches!(r, Err(BenchError::EmptyDataset)));
}

#[test]
fn report_files_are_written() {
    let run = run_benchmark(&problems(), replay(&corpus().join("fixtures")).unwrap().as_ref(), &RunConfig::default(), 3).unwrap();
    let out = tempfile::tempdir().unwrap();
    let table = emit_report(&run.report, out.path()).unwrap();
    assert!(table.contains("66.7% | 16.7% | 8.3%"), "{table}");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["n"], 12);
    assert_eq!(json["rows"].as_array().unwrap().len(), 12);
}
