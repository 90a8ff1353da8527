//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use ormind_core::counterfactual::{analyze, analyze_point, derive_checks, report_to_feedback, CheckKind};
use ormind_core::model::{Assignment, Constraint, LinExpr, ModelIR, ObjSense, Objective, Sense, VarKind, VariableDef};
use ormind_core::solver::{check_feasibility, solve_milp, SolveOptions, SolveStatus, ViolationKind};
use ormind_core::parse_model_document;
use ormind_pipeline::llm::{FixtureStore, StubServer};
use ormind_pipeline::run::{parse_draft, reference_checks, InstanceRun, StepKind};
use ormind_pipeline::{classify, load_problems, Classification, ProblemInput, Trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn corpus() -> PathBuf {
    root().join("corpus")
}

fn problem(id: &str) -> ProblemInput {
    load_problems(&corpus().join("problems").join(format!("{id}.json")))
        .unwrap()
        .problems
        .remove(0)
}

fn fixture(id: &str, key: &str) -> String {
    let store = FixtureStore::load_dir(&corpus().join("fixtures")).unwrap();
    store.problem(id).unwrap()[key].content.clone()
}

fn ormind(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ormind"));
    cmd.args(args).env_remove("ORMIND_API_KEY").env_remove("ORMIND_BASE_URL");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("ormind runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const PHARMACY_FINAL: &str = r#"{
  "variables": [
    {"name": "painkillers", "kind": "integer", "lower": 50},
    {"name": "sleeping_pills", "kind": "integer", "lower": 0}
  ],
  "constraints": [
    "10*painkillers + 6*sleeping_pills <= 3000",
    "3*painkillers + 5*sleeping_pills >= 0.7*(painkillers + sleeping_pills)",
    "sleeping_pills >= 0.7*(painkillers + sleeping_pills)"
  ],
  "objective": {"sense": "min", "expr": "3*painkillers + 5*sleeping_pills"}
}"#;

const PHARMACY_FAULTY: &str = r#"{
  "variables": [
    {"name": "painkillers", "kind": "integer", "lower": 50},
    {"name": "sleeping_pills", "kind": "integer", "lower": 0}
  ],
  "constraints": [
    "10*painkillers + 6*sleeping_pills <= 3000",
    "3*painkillers + 5*sleeping_pills >= 0.7*(painkillers + sleeping_pills)"
  ],
  "objective": {"sense": "min", "expr": "3*painkillers + 5*sleeping_pills"}
}"#;

fn criterion_1() -> Outcome {
    let model = parse_model_document(PHARMACY_FINAL).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let r = solve_milp(&model, &SolveOptions::default());
    let elapsed = start.elapsed();
    let a = r.assignment.clone().ok_or("no assignment")?;
    let obj = r.objective.ok_or("no objective")?;
    check(r.status == SolveStatus::Optimal, || format!("status {:?}", r.status))?;
    check((obj - 735.0).abs() <= 1e-6, || format!("objective {obj}"))?;
    check(a["painkillers"] == 50.0 && a["sleeping_pills"] == 117.0, || format!("{a:?}"))?;
    check(elapsed < Duration::from_millis(50), || format!("took {elapsed:?}"))?;
    Ok(format!("735 at (50, 117) in {elapsed:?}"))
}

fn criterion_2() -> Outcome {
    let model = parse_model_document(PHARMACY_FAULTY).map_err(|e| e.to_string())?;
    let r = solve_milp(&model, &SolveOptions::default());
    check(r.objective == Some(150.0), || format!("faulty optimum {:?}", r.objective))?;
    let draft = parse_draft(&fixture("pharmacy", "Formalization/0"))?;
    let (checks, _) = reference_checks(&draft, &model, &BTreeMap::new());
    let report = analyze(&checks, &r, 1e-2).map_err(|e| e.to_string())?;
    let needed: Vec<_> = report.needed().collect();
    let constraint_class = [CheckKind::RatioConstraint, CheckKind::ResourceConstraint];
    let flagged: Vec<_> = needed.iter().filter(|e| constraint_class.contains(&e.kind)).collect();
    check(flagged.len() == 1 && flagged[0].kind == CheckKind::RatioConstraint, || {
        format!("flagged {:?}", needed.iter().map(|e| (&e.id, e.kind)).collect::<Vec<_>>())
    })?;
    let feedback = report_to_feedback(&report).map_err(|e| e.to_string())?;
    let line = feedback
        .lines
        .iter()
        .find(|l| l.text.contains("at least 70"))
        .ok_or_else(|| format!("feedback {feedback}"))?;
    Ok(format!("{} checks, one flagged: {}", checks.len(), line.text))
}

/// Solves the corpus document for `id` on every instance and classifies it.
fn corpus_model(id: &str) -> Result<(Vec<InstanceRun>, Classification), String> {
    let p = problem(id);
    let doc = fixture(id, "SupervisorForward/0");
    let mut runs = Vec::new();
    let mut models = Vec::new();
    for (i, inst) in p.instances.iter().enumerate() {
        let model = ormind_core::model::parse_model_document_with(&doc, &inst.bindings()).map_err(|e| e.to_string())?;
        runs.push(InstanceRun {
            instance: i,
            model_error: None,
            result: Some(solve_milp(&model, &SolveOptions::default())),
        });
        models.push(Some(model));
    }
    let c = classify(true, &runs, &p.instances, &models, true, Default::default());
    Ok((runs, c))
}

fn criterion_3() -> Outcome {
    let (runs, c) = corpus_model("fishery")?;
    let r = runs[0].result.as_ref().unwrap();
    let obj = r.objective.ok_or("no objective")?;
    check((obj - 3000.0).abs() <= 1e-2, || format!("objective {obj}"))?;
    check(c == Classification::Success, || format!("classified {c}"))?;
    Ok(format!("objective {obj}, {c}"))
}

fn criterion_4() -> Outcome {
    let (runs, c) = corpus_model("aircraft")?;
    let status = &runs[0].result.as_ref().unwrap().status;
    check(*status == SolveStatus::Infeasible, || format!("status {status:?}"))?;
    check(c == Classification::Success, || format!("classified {c}"))?;
    Ok(format!("Infeasible, {c}"))
}

fn criterion_5(tmp: &Path) -> Outcome {
    let problem = corpus().join("problems/pharmacy.json");
    let mut traces = Vec::new();
    for i in 0..2 {
        let path = tmp.join(format!("pharmacy-{i}.json"));
        let out = ormind(&["solve", problem.to_str().unwrap(), "--trace", path.to_str().unwrap()], &[]);
        check(out.status.code() == Some(0), || format!("exit {:?}: {}", out.status.code(), stdout(&out)))?;
        check(stdout(&out).contains("735"), || stdout(&out))?;
        traces.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    check(traces[0] == traces[1], || "traces differ between runs".into())?;
    let trace: Trace = serde_json::from_slice(&traces[0]).map_err(|e| e.to_string())?;
    use StepKind::*;
    let expected = [SemanticEncoder, Formalization, Compiler, SupervisorFwd, Execute, ReasonerCF, SupervisorBwd, Execute, ReasonerCF];
    check(trace.step_kinds() == expected, || format!("{:?}", trace.step_kinds()))?;
    check(trace.classification == Classification::Success, || format!("{}", trace.classification))?;
    check((trace.repairs.syntax, trace.repairs.counterfactual) == (0, 1), || format!("{:?}", trace.repairs))?;
    Ok("forward pass, one counterfactual repair, accepted; traces byte-identical".into())
}

/// Integer-data program for the enumeration oracle.
struct SmallIp {
    bounds: Vec<(i64, i64)>,
    rows: Vec<(Vec<i64>, i8, i64)>,
    cost: Vec<i64>,
    maximize: bool,
}

fn random_ip(rng: &mut ChaCha8Rng) -> SmallIp {
    let n = rng.gen_range(1..=4);
    SmallIp {
        bounds: (0..n)
            .map(|_| {
                let a = rng.gen_range(0..=20);
                let b = rng.gen_range(0..=20);
                (a.min(b), a.max(b))
            })
            .collect(),
        rows: (0..rng.gen_range(0..=5))
            .map(|_| ((0..n).map(|_| rng.gen_range(-6..=6)).collect(), rng.gen_range(-1..=1), rng.gen_range(-30..=80)))
            .collect(),
        cost: (0..n).map(|_| rng.gen_range(-9..=9)).collect(),
        maximize: rng.gen(),
    }
}

fn brute_force(ip: &SmallIp) -> Option<i64> {
    fn rec(ip: &SmallIp, x: &mut Vec<i64>, best: &mut Option<i64>) {
        if x.len() == ip.bounds.len() {
            let ok = ip.rows.iter().all(|(a, s, b)| {
                let lhs: i64 = a.iter().zip(x.iter()).map(|(a, x)| a * x).sum();
                match s {
                    -1 => lhs <= *b,
                    1 => lhs >= *b,
                    _ => lhs == *b,
                }
            });
            if ok {
                let v: i64 = ip.cost.iter().zip(x.iter()).map(|(c, x)| c * x).sum();
                let better = match best {
                    None => true,
                    Some(b) => (ip.maximize && v > *b) || (!ip.maximize && v < *b),
                };
                if better {
                    *best = Some(v);
                }
            }
            return;
        }
        let (lo, hi) = ip.bounds[x.len()];
        for v in lo..=hi {
            x.push(v);
            rec(ip, x, best);
            x.pop();
        }
    }
    let mut best = None;
    rec(ip, &mut Vec::new(), &mut best);
    best
}

fn ip_model(ip: &SmallIp) -> ModelIR {
    let var = |i: usize| format!("z{i}");
    let expr = |c: &[i64]| LinExpr::from_terms(c.iter().enumerate().map(|(i, c)| (var(i), *c as f64)), 0.0);
    ModelIR {
        variables: ip
            .bounds
            .iter()
            .enumerate()
            .map(|(i, (lo, hi))| VariableDef::new(var(i), VarKind::Integer, *lo as f64, *hi as f64))
            .collect(),
        constraints: ip
            .rows
            .iter()
            .enumerate()
            .map(|(k, (a, s, b))| {
                let sense = match s {
                    -1 => Sense::Le,
                    1 => Sense::Ge,
                    _ => Sense::Eq,
                };
                Constraint::new(format!("row{k}"), expr(a), sense, *b as f64)
            })
            .collect(),
        objective: Objective {
            sense: if ip.maximize { ObjSense::Maximize } else { ObjSense::Minimize },
            expr: expr(&ip.cost),
        },
    }
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0006);
    let start = Instant::now();
    let (mut feasible, mut status_agree, mut value_agree) = (0, 0, 0);
    for case in 0..200 {
        let ip = random_ip(&mut rng);
        let oracle = brute_force(&ip);
        let r = solve_milp(&ip_model(&ip), &SolveOptions::default());
        match oracle {
            None => {
                if r.status == SolveStatus::Infeasible {
                    status_agree += 1;
                    value_agree += 1;
                }
            }
            Some(best) => {
                feasible += 1;
                if r.status == SolveStatus::Optimal {
                    status_agree += 1;
                    if r.objective.is_some_and(|o| (o - best as f64).abs() <= 1e-6) {
                        value_agree += 1;
                    }
                }
            }
        }
        if status_agree + value_agree < 2 * (case + 1) {
            return Err(format!("case {case}: oracle {oracle:?}, solver {:?} {:?}", r.status, r.objective));
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("200/200 status, {feasible} feasible objectives agree, {elapsed:?}"))
}

fn criterion_7(tmp: &Path) -> Outcome {
    let out_path = tmp.join("corpus-report.json");
    let problems = corpus().join("problems");
    let out = ormind(&["bench", problems.to_str().unwrap(), "--out", out_path.to_str().unwrap(), "--table"], &[]);
    check(out.status.code() == Some(0), || format!("exit {:?}", out.status.code()))?;
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_path).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let get = |k: &str| r[k].as_f64().unwrap_or(f64::NAN);
    check(r["n"] == 12, || format!("n = {}", r["n"]))?;
    check(get("sr") == 8.0 / 12.0, || format!("SR {}", get("sr")))?;
    check(get("mffr") == 2.0 / 12.0, || format!("MFFR {}", get("mffr")))?;
    check(get("iefr") == 1.0 / 12.0, || format!("IEFR {}", get("iefr")))?;
    let total = get("sr") + get("mffr") + get("iefr") + get("wrong_answer_rate");
    check((total - 1.0).abs() < 1e-12, || format!("rates sum to {total}"))?;
    Ok(format!("SR 8/12, MFFR 2/12, IEFR 1/12; {}", stdout(&out).lines().nth(2).unwrap_or("")))
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0008);
    let mut agree = 0;
    for case in 0..500 {
        let n = rng.gen_range(1..=5);
        let names: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let model = ModelIR {
            variables: names
                .iter()
                .map(|v| VariableDef::new(v.clone(), VarKind::Continuous, 0.0, f64::INFINITY))
                .collect(),
            constraints: (0..rng.gen_range(1..=6))
                .map(|k| {
                    let mut terms = Vec::new();
                    for v in &names {
                        if rng.gen_bool(0.8) {
                            terms.push((v.clone(), rng.gen_range(-8..=8) as f64));
                        }
                    }
                    let lhs = LinExpr::from_terms(terms, 0.0);
                    let sense = [Sense::Le, Sense::Ge, Sense::Eq][rng.gen_range(0..3)];
                    Constraint::new(format!("k{k}"), lhs, sense, rng.gen_range(-25..=25) as f64)
                })
                .collect(),
            objective: Objective {
                sense: ObjSense::Minimize,
                expr: LinExpr::default(),
            },
        };
        let Ok(model) = model.validated() else {
            agree += 1;
            continue;
        };
        // points on a quarter grid, some nudged to just inside or outside the tolerance
        let x: Assignment = names
            .iter()
            .map(|v| {
                let base = rng.gen_range(0..=32) as f64 / 4.0;
                let nudge = [0.0, 0.003, -0.003, 0.02, -0.02][rng.gen_range(0..5)];
                (v.clone(), (base + nudge).max(0.0))
            })
            .collect();
        let report = analyze_point(&derive_checks(&model), &x, 0.0, 1e-2).map_err(|e| e.to_string())?;
        let constraint_names: BTreeSet<&str> = model.constraints.iter().map(|c| c.name.as_str()).collect();
        let flagged: BTreeSet<&str> = report
            .entries
            .iter()
            .filter(|e| e.modification_needed && constraint_names.contains(e.subject.as_str()))
            .map(|e| e.subject.as_str())
            .collect();
        let violations = check_feasibility(&model, &x, 1e-2).map_err(|e| e.to_string())?;
        let violated: BTreeSet<&str> = violations
            .iter()
            .filter(|v| v.kind == ViolationKind::Constraint)
            .map(|v| v.subject.as_str())
            .filter(|s| constraint_names.contains(s))
            .collect();
        if flagged == violated {
            agree += 1;
        } else {
            return Err(format!("case {case}: flagged {flagged:?}, violated {violated:?}"));
        }
    }
    Ok(format!("{agree}/500 agree"))
}

fn criterion_9(tmp: &Path) -> Outcome {
    let problem = corpus().join("problems/pharmacy.json");
    let run = |envs: &[(&str, &str)], base_url: Option<&str>, name: &str| -> Result<Trace, String> {
        let path = tmp.join(name);
        let mut args = vec!["solve", problem.to_str().unwrap(), "--live", "--trace", path.to_str().unwrap()];
        if let Some(u) = base_url {
            args.extend(["--base-url", u]);
        }
        let out = ormind(&args, envs);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| format!("no trace (exit {:?}): {e}; {}", out.status.code(), String::from_utf8_lossy(&out.stderr)))?;
        serde_json::from_str(&text).map_err(|e| e.to_string())
    };
    let complete = |t: &Trace| -> Result<(), String> {
        check(t.stage_error.is_none(), || format!("stopped: {:?}", t.stage_error))?;
        check(t.step_kinds().last() == Some(&StepKind::ReasonerCF), || format!("{:?}", t.step_kinds()))
    };

    let problems = load_problems(&corpus().join("problems")).unwrap().problems;
    let store = FixtureStore::load_dir(&corpus().join("fixtures")).unwrap();
    let server = StubServer::from_fixtures(store, &problems).map_err(|e| e.to_string())?;
    let stub = run(&[("ORMIND_API_KEY", "stub-key")], Some(&server.base_url()), "live-stub.json")?;
    complete(&stub)?;
    let mut detail = format!("live path against local endpoint: all stages, {}", stub.classification);

    match std::env::var("ORMIND_API_KEY").ok().filter(|k| !k.is_empty()) {
        Some(key) => {
            let base = std::env::var("ORMIND_BASE_URL").ok();
            let mut envs = vec![("ORMIND_API_KEY", key.as_str())];
            if let Some(b) = &base {
                envs.push(("ORMIND_BASE_URL", b.as_str()));
            }
            let live = run(&envs, None, "live.json")?;
            complete(&live)?;
            detail.push_str(&format!("; hosted endpoint: all stages, {}", live.classification));
        }
        None => detail.push_str("; hosted endpoint skipped (ORMIND_API_KEY not set)"),
    }
    Ok(detail)
}

fn criterion_10(tmp: &Path) -> Outcome {
    let problems_dir = corpus().join("problems");
    let problems = load_problems(&problems_dir).unwrap().problems;
    let store = FixtureStore::load_dir(&corpus().join("fixtures")).unwrap();
    let server = StubServer::from_fixtures(store, &problems).map_err(|e| e.to_string())?;
    let recorded = tmp.join("recorded");
    let live_report = tmp.join("record-report.json");
    let replay_report = tmp.join("replay-report.json");

    let missing_key = ormind(&["record", problems_dir.to_str().unwrap(), "--fixtures", recorded.to_str().unwrap()], &[]);
    check(missing_key.status.code() == Some(64), || format!("missing key exit {:?}", missing_key.status.code()))?;
    check(server.requests().is_empty(), || "network call without a key".into())?;

    let rec = ormind(
        &[
            "record",
            problems_dir.to_str().unwrap(),
            "--fixtures",
            recorded.to_str().unwrap(),
            "--base-url",
            &server.base_url(),
            "--out",
            live_report.to_str().unwrap(),
        ],
        &[("ORMIND_API_KEY", "stub-key")],
    );
    check(rec.status.code() == Some(0), || format!("record exit {:?}: {}", rec.status.code(), String::from_utf8_lossy(&rec.stderr)))?;
    let rep = ormind(
        &[
            "bench",
            problems_dir.to_str().unwrap(),
            "--fixtures",
            recorded.to_str().unwrap(),
            "--replay",
            "--out",
            replay_report.to_str().unwrap(),
        ],
        &[],
    );
    check(rep.status.code() == Some(0), || format!("replay exit {:?}", rep.status.code()))?;

    let load = |p: &Path| -> Result<serde_json::Value, String> {
        let mut v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(p).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        for row in v["rows"].as_array_mut().ok_or("no rows")? {
            row["wall_time_ms"] = 0.into();
        }
        Ok(v)
    };
    let (a, b) = (load(&live_report)?, load(&replay_report)?);
    check(a == b, || "recorded and replayed reports differ".into())?;
    let classes: BTreeMap<String, String> = b["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| (r["id"].as_str().unwrap().to_string(), r["classification"].as_str().unwrap().to_string()))
        .collect();
    Ok(format!("{} problems, identical classifications and aggregates (SR {})", classes.len(), b["sr"]))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let t = tmp.path();
    let criteria: Vec<Criterion> = vec![
        ("1 pharmacy final model", Box::new(criterion_1)),
        ("2 pharmacy faulty model feedback", Box::new(criterion_2)),
        ("3 fishery", Box::new(criterion_3)),
        ("4 aircraft", Box::new(criterion_4)),
        ("5 end-to-end replay", Box::new(|| criterion_5(t))),
        ("6 MILP oracle equivalence", Box::new(criterion_6)),
        ("7 metric accounting", Box::new(|| criterion_7(t))),
        ("8 counterfactual/feasibility equivalence", Box::new(criterion_8)),
        ("9 live-mode smoke test", Box::new(|| criterion_9(t))),
        ("10 record/replay round trip", Box::new(|| criterion_10(t))),
    ];
    let mut failed = 0;
    for (name, f) in &criteria {
        match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
            Ok(Ok(detail)) => println!("PASS criterion {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL criterion {name}: panicked");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
