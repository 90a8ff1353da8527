//! `ormind` command-line driver.

mod inspect;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ormind_core::solver::SolveOptions;
use ormind_pipeline::fsutil::write_atomic;
use ormind_pipeline::llm::{ChatClient, LiveClient, LiveConfig, RecordingClient, ReplayClient, API_KEY_VAR, DEFAULT_MODEL};
use ormind_pipeline::{
    load_problems, run_benchmark, solve_problem, sweep_table, sweep_temperature, BenchError, BenchReport, Classification,
    DatasetError, ProblemInput, RunConfig, Trace,
};

pub use inspect::narrative;

/// Environment variable overriding the default endpoint base URL.
pub const BASE_URL_VAR: &str = "ORMIND_BASE_URL";

pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_IO: i32 = 74;

pub fn exit_code(c: Classification) -> i32 {
    match c {
        Classification::Success => 0,
        Classification::WrongAnswer => 1,
        Classification::FormulationFailure => 2,
        Classification::ExecutionFailure => 3,
    }
}

#[derive(Debug, Parser)]
#[command(name = "ormind", version, about = "Turn optimization word problems into solved models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the pipeline on one problem file.
    Solve {
        problem: PathBuf,
        #[command(flatten)]
        client: ClientArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Where to write the run trace (default: <problem-id>.trace.json).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run every problem in a dataset and report aggregate rates.
    Bench {
        dataset: PathBuf,
        #[command(flatten)]
        client: ClientArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Report JSON path; a text table is written next to it with a .txt extension.
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
        /// Print the rate table on stdout.
        #[arg(long)]
        table: bool,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        /// Directory for per-problem traces.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Benchmark at several temperatures. In replay mode, `<fixtures>/t<temp>` is used when present.
    Sweep {
        dataset: PathBuf,
        /// Strictly increasing, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        temps: Vec<f64>,
        #[command(flatten)]
        client: ClientArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "sweep.json")]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
    /// Run a dataset against a live endpoint and save every response as a replay fixture.
    Record {
        dataset: PathBuf,
        /// Output fixture directory.
        #[arg(long)]
        fixtures: PathBuf,
        #[arg(long)]
        base_url: Option<String>,
        #[arg(long, default_value = DEFAULT_MODEL)]
        model: String,
        #[arg(long, default_value_t = 0.0)]
        temperature: f64,
        #[command(flatten)]
        run: RunArgs,
        /// Also write the benchmark report of the recorded run.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
    /// Print a stage-by-stage narrative of a trace file.
    Inspect { trace: PathBuf },
}

#[derive(Debug, Args)]
struct ClientArgs {
    /// Fixture directory for replay (default: a `fixtures` directory next to the problems).
    #[arg(long)]
    fixtures: Option<PathBuf>,
    #[arg(long, conflicts_with = "replay")]
    live: bool,
    #[arg(long)]
    replay: bool,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long, default_value = DEFAULT_MODEL)]
    model: String,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, default_value_t = 1)]
    max_syntax_repairs: u32,
    #[arg(long, default_value_t = 1)]
    max_cf_repairs: u32,
    /// Add the model-based reasoner pass to counterfactual feedback.
    #[arg(long)]
    llm_reasoner: bool,
    /// Solver time limit per solve, in seconds.
    #[arg(long, default_value_t = 10.0)]
    time_limit: f64,
}

impl RunArgs {
    fn config(&self, model: &str, temperature: f64) -> RunConfig {
        RunConfig {
            max_syntax_repairs: self.max_syntax_repairs,
            max_cf_repairs: self.max_cf_repairs,
            temperature,
            model_id: model.to_string(),
            solver: SolveOptions {
                time_limit_secs: Some(self.time_limit),
                ..SolveOptions::default()
            },
            llm_reasoner_enabled: self.llm_reasoner,
            ..RunConfig::default()
        }
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Io(anyhow::Error),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::EmptyDataset => CliError::Data(e.to_string()),
            BenchError::UnsortedTemperatures(_) | BenchError::Client { .. } => CliError::Usage(e.to_string()),
            BenchError::Io(_) => CliError::Io(e.into()),
        }
    }
}

fn dataset_error(e: DatasetError) -> CliError {
    let DatasetError::EmptyDataset { path, errors } = &e;
    let mut msg = format!("no problems loaded from {}", path.display());
    for err in errors {
        let _ = write!(msg, "\n  {err}");
    }
    CliError::Data(msg)
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("error: {m}"),
                CliError::Data(m) => eprintln!("error: {m}"),
                CliError::Io(err) => eprintln!("error: {err:#}"),
            }
            e.code()
        }
    }
}

fn api_key() -> Option<String> {
    std::env::var(API_KEY_VAR).ok().filter(|k| !k.trim().is_empty())
}

fn live_client(base_url: Option<&str>) -> Result<LiveClient, CliError> {
    let key = api_key().ok_or_else(|| CliError::Usage(format!("live mode needs {API_KEY_VAR} to be set")))?;
    let mut config = LiveConfig::new(key);
    if let Some(url) = base_url.map(str::to_string).or_else(|| std::env::var(BASE_URL_VAR).ok()) {
        config.base_url = url;
    }
    LiveClient::new(config).map_err(|e| CliError::Usage(e.to_string()))
}

enum Mode {
    Replay(PathBuf),
    Live,
}

/// `fixtures` next to the directory holding the problems, e.g. `corpus/fixtures` for `corpus/problems`.
fn default_fixtures(problems: &Path) -> Option<PathBuf> {
    let dir = if problems.is_dir() { problems } else { problems.parent()? };
    let dir = if dir.as_os_str().is_empty() { Path::new(".") } else { dir };
    Some(dir.join("..").join("fixtures"))
}

fn resolve_mode(args: &ClientArgs, problems: &Path) -> Result<Mode, CliError> {
    if args.live {
        return Ok(Mode::Live);
    }
    if let Some(f) = &args.fixtures {
        return if f.is_dir() {
            Ok(Mode::Replay(f.clone()))
        } else {
            Err(CliError::Usage(format!("fixture directory {} does not exist", f.display())))
        };
    }
    match default_fixtures(problems) {
        Some(f) if f.is_dir() => Ok(Mode::Replay(f)),
        _ if args.replay => Err(CliError::Usage("replay mode needs --fixtures".into())),
        _ => Ok(Mode::Live),
    }
}

fn client_for(mode: &Mode, args: &ClientArgs) -> Result<Box<dyn ChatClient>, CliError> {
    match mode {
        Mode::Replay(dir) => ReplayClient::from_dir(dir)
            .map(|c| Box::new(c) as Box<dyn ChatClient>)
            .map_err(|e| CliError::Usage(e.to_string())),
        Mode::Live => live_client(args.base_url.as_deref()).map(|c| Box::new(c) as Box<dyn ChatClient>),
    }
}

fn write_json(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn report_json(report: &BenchReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

fn write_report(report: &BenchReport, out: &Path) -> Result<(), CliError> {
    write_json(out, &report_json(report))?;
    write_json(&out.with_extension("txt"), &report.table())
}

fn write_traces(dir: &Path, traces: &[Trace]) -> Result<(), CliError> {
    for t in traces {
        write_json(&dir.join(format!("{}.json", t.problem)), &t.to_json())?;
    }
    Ok(())
}

fn load_one(path: &Path) -> Result<ProblemInput, CliError> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("problem file {} not found", path.display())));
    }
    let mut ds = load_problems(path).map_err(dataset_error)?;
    if ds.problems.len() != 1 {
        return Err(CliError::Usage(format!(
            "{} holds {} problems; use `ormind bench` for collections",
            path.display(),
            ds.problems.len()
        )));
    }
    Ok(ds.problems.remove(0))
}

fn load_dataset(path: &Path) -> Result<Vec<ProblemInput>, CliError> {
    let ds = load_problems(path).map_err(dataset_error)?;
    for e in &ds.errors {
        eprintln!("warning: skipped {e}");
    }
    Ok(ds.problems)
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Solve {
            problem,
            client,
            run,
            trace,
        } => {
            let input = load_one(&problem)?;
            let mode = resolve_mode(&client, &problem)?;
            let chat = client_for(&mode, &client)?;
            let outcome = solve_problem(&input, &run.config(&client.model, client.temperature), chat.as_ref());
            let trace_path = trace.unwrap_or_else(|| PathBuf::from(format!("{}.trace.json", input.id)));
            write_json(&trace_path, &outcome.trace.to_json())?;

            println!("problem: {}", input.id);
            println!("classification: {}", outcome.classification);
            for run in &outcome.finals {
                if outcome.finals.len() > 1 {
                    println!("instance {}:", run.instance);
                }
                match (&run.model_error, &run.result) {
                    (Some(e), _) => println!("model error: {e}"),
                    (None, Some(r)) => {
                        println!("status: {}", r.status.label());
                        if let Some(obj) = r.objective {
                            println!("objective: {obj}");
                        }
                        for (name, value) in r.assignment.iter().flatten() {
                            println!("{name} = {value}");
                        }
                    }
                    (None, None) => {}
                }
            }
            if let Some(e) = &outcome.trace.stage_error {
                println!("stopped: {e}");
            }
            let r = outcome.trace.repairs;
            println!("repairs: syntax {}, counterfactual {}", r.syntax, r.counterfactual);
            println!("trace: {}", trace_path.display());
            Ok(exit_code(outcome.classification))
        }
        Command::Bench {
            dataset,
            client,
            run,
            out,
            table,
            workers,
            traces,
        } => {
            let problems = load_dataset(&dataset)?;
            let mode = resolve_mode(&client, &dataset)?;
            let chat = client_for(&mode, &client)?;
            let result = run_benchmark(&problems, chat.as_ref(), &run.config(&client.model, client.temperature), workers)?;
            write_report(&result.report, &out)?;
            if let Some(dir) = traces {
                write_traces(&dir, &result.traces)?;
            }
            if table {
                print!("{}", result.report.table());
            } else {
                let r = &result.report;
                println!("N = {}: SR {:.4}, MFFR {:.4}, IEFR {:.4}, wrong {:.4}", r.n, r.sr, r.mffr, r.iefr, r.wrong_answer_rate);
            }
            println!("report: {}", out.display());
            Ok(0)
        }
        Command::Sweep {
            dataset,
            temps,
            client,
            run,
            out,
            workers,
        } => {
            let problems = load_dataset(&dataset)?;
            let mode = resolve_mode(&client, &dataset)?;
            let config = run.config(&client.model, client.temperature);
            let runs = sweep_temperature(&problems, &temps, &config, workers, |t| {
                let mode = match &mode {
                    Mode::Replay(dir) => {
                        let per_temp = dir.join(format!("t{t}"));
                        Mode::Replay(if per_temp.is_dir() { per_temp } else { dir.clone() })
                    }
                    Mode::Live => Mode::Live,
                };
                client_for(&mode, &client).map_err(|e| match e {
                    CliError::Usage(m) | CliError::Data(m) => m,
                    CliError::Io(e) => e.to_string(),
                })
            })?;
            let reports: Vec<&BenchReport> = runs.iter().map(|r| &r.report).collect();
            let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
            write_json(&out, &json)?;
            print!("{}", sweep_table(&reports));
            println!("report: {}", out.display());
            Ok(0)
        }
        Command::Record {
            dataset,
            fixtures,
            base_url,
            model,
            temperature,
            run,
            out,
            workers,
        } => {
            if api_key().is_none() {
                return Err(CliError::Usage(format!("recording needs {API_KEY_VAR} to be set")));
            }
            let problems = load_dataset(&dataset)?;
            let live: Arc<dyn ChatClient> = Arc::new(live_client(base_url.as_deref())?);
            let recorder = RecordingClient::new(live, &fixtures).map_err(|e| CliError::Io(e.into()))?;
            let result = run_benchmark(&problems, &recorder, &run.config(&model, temperature), workers)?;
            let store = recorder.recorded();
            for row in &result.report.rows {
                let keys = store.problem(&row.id).map_or(0, |m| m.len());
                match &row.stage_error {
                    Some(e) if e.contains("call failed") => println!("{}: {keys} responses recorded; {e}", row.id),
                    _ => println!("{}: {keys} responses recorded", row.id),
                }
            }
            println!("{} responses in {}", store.len(), fixtures.display());
            if let Some(out) = out {
                write_report(&result.report, &out)?;
            }
            Ok(0)
        }
        Command::Inspect { trace } => {
            let text = std::fs::read_to_string(&trace)
                .map_err(|e| CliError::Usage(format!("{}: {e}", trace.display())))?;
            if text.trim().is_empty() {
                return Err(CliError::Data(format!("{} is empty", trace.display())));
            }
            let parsed: Trace = serde_json::from_str(&text)
                .map_err(|e| CliError::Data(format!("{} is not a run trace: {e}", trace.display())))?;
            print!("{}", narrative(&parsed));
            Ok(0)
        }
    }
}
