//! `cortexc` command-line front end: run one spec, run a benchmark suite, or
//! rebuild a report from saved runs.

pub mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use cortexc_core::comms::{Blackboard, MessageBus};
use cortexc_core::evaluation::{
    accuracy, bench_report, development_time, format_accuracy, ingest_survey, read_survey_file,
    BenchRow, SurveyMeans,
};
use cortexc_core::integration::write_run_outputs;
use cortexc_core::model::{Mode, PipelineRun, RunStatus, TaskSpec};
use cortexc_core::orchestrator::{Backends, JsonLinesSink, Orchestrator, OrchestratorError, RunRequest};
use serde::Deserialize;

use config::{CliConfig, CommonFlags, ModeFlag};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUN_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(name = "cortexc", version, about = "Multi-agent code generation pipelines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one spec through the pipeline.
    Run {
        spec: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Run every (spec, pipeline) pair of a suite and write a report.
    Bench {
        suite: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Rebuild a report from saved runs (files, directories or run ids).
    Report {
        #[arg(required = true)]
        runs: Vec<String>,
        #[command(flatten)]
        flags: CommonFlags,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEntry {
    pub spec_path: PathBuf,
    pub pipelines: Vec<ModeFlag>,
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let result = match &cli.command {
        Command::Run { spec, flags } => cmd_run(spec, flags, out),
        Command::Bench { suite, flags } => cmd_bench(suite, flags, out, err),
        Command::Report { runs, flags } => cmd_report(runs, flags, out),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn load_spec(path: &Path) -> Result<TaskSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read spec {}: {e}", path.display())))?;
    TaskSpec::from_json(&text).map_err(|e| usage(format!("bad spec {}: {e}", path.display())))
}

/// `<spec_id>-<UTC timestamp>-<4 hex digits of the seed>`.
pub fn default_run_id(spec_id: &str, seed: u64) -> String {
    let ts = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    format!("{spec_id}-{ts}-{:04x}", seed & 0xffff)
}

fn load_survey(config: &CliConfig) -> Result<Option<SurveyMeans>, CliError> {
    let Some(path) = &config.survey else {
        return Ok(None);
    };
    let rows = read_survey_file(path).map_err(|e| usage(format!("bad survey {}: {e}", path.display())))?;
    let means = ingest_survey(&rows).map_err(|e| usage(format!("bad survey {}: {e}", path.display())))?;
    Ok(Some(means))
}

/// Runs and persists one spec. `Err` only for configuration problems; a
/// failed run is still `Ok`.
fn execute(config: &CliConfig, spec: TaskSpec, run_id: String) -> Result<(PipelineRun, Option<String>), CliError> {
    let backend = config.backend.build().map_err(|e| usage(e.to_string()))?;
    let orch = Orchestrator::new(config.orchestrator(spec.mode), Backends::new(backend)).map_err(|e| usage(e.to_string()))?;

    let run_dir = config.outputs_dir().join(&run_id);
    std::fs::create_dir_all(&run_dir).map_err(|e| usage(format!("cannot create {}: {e}", run_dir.display())))?;
    let log = File::create(run_dir.join("events.jsonl")).map_err(|e| usage(format!("cannot write event log: {e}")))?;
    let mut events = JsonLinesSink::new(BufWriter::new(log));

    let request = RunRequest {
        run_id,
        spec,
        seed: config.backend.seed,
    };
    let outcome = match orch.run_pipeline(&request, &MessageBus::new(), &Blackboard::new(), &mut events) {
        Ok(o) => o,
        Err(e @ (OrchestratorError::Config(_) | OrchestratorError::Graph(_))) => return Err(usage(e.to_string())),
        Err(e) => return Err(usage(format!("run aborted: {e}"))),
    };
    let _ = events.into_inner().flush();
    outcome
        .run
        .save(&config.runs_dir())
        .map_err(|e| usage(format!("cannot save run: {e}")))?;
    write_run_outputs(&outcome.run, &config.outputs_dir()).map_err(|e| usage(format!("cannot write outputs: {e}")))?;
    Ok((outcome.run, outcome.failure))
}

fn exit_for(status: RunStatus) -> i32 {
    match status {
        RunStatus::Succeeded => EXIT_OK,
        RunStatus::Failed => EXIT_RUN_FAILED,
    }
}

pub fn cmd_run(spec_path: &Path, flags: &CommonFlags, out: &mut dyn Write) -> Result<i32, CliError> {
    let config = CliConfig::resolve(flags)?;
    let mut spec = load_spec(spec_path)?;
    if let Some(mode) = config.mode {
        spec.mode = mode;
    }
    let run_id = config
        .run_id
        .clone()
        .unwrap_or_else(|| default_run_id(&spec.spec_id, config.backend.seed));
    let (run, failure) = execute(&config, spec, run_id)?;

    let _ = writeln!(out, "run {} {}", run.run_id, run.status);
    let _ = writeln!(out, "tasks: {}", run.graph.len());
    let _ = writeln!(out, "artifacts: {}", run.artifacts.len());
    if let Ok(minutes) = development_time(&run) {
        let _ = writeln!(out, "dev time: {minutes:.2} min");
    }
    let _ = writeln!(out, "accuracy: {}", format_accuracy(accuracy(&run)));
    if let Some(reason) = failure {
        let _ = writeln!(out, "failure: {reason}");
    }
    let _ = writeln!(out, "record: {}", config.runs_dir().join(format!("{}.json", run.run_id)).display());
    Ok(exit_for(run.status))
}

pub fn load_suite(path: &Path) -> Result<Vec<SuiteEntry>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read suite {}: {e}", path.display())))?;
    let entries: Vec<SuiteEntry> =
        serde_json::from_str(&text).map_err(|e| usage(format!("bad suite {}: {e}", path.display())))?;
    if entries.is_empty() || entries.iter().all(|e| e.pipelines.is_empty()) {
        return Err(usage(format!("suite {} has no runs", path.display())));
    }
    Ok(entries)
}

pub fn cmd_bench(suite_path: &Path, flags: &CommonFlags, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let config = CliConfig::resolve(flags)?;
    let suite = load_suite(suite_path)?;
    let survey = load_survey(&config)?;
    let base = suite_path.parent().unwrap_or(Path::new("."));
    let batch = config
        .run_id
        .clone()
        .unwrap_or_else(|| default_run_id("bench", config.backend.seed));

    let mut rows = Vec::new();
    for entry in &suite {
        let spec_path = base.join(&entry.spec_path);
        let loaded = load_spec(&spec_path);
        for pipeline in &entry.pipelines {
            let mode = Mode::from(*pipeline);
            let fallback_name = entry.spec_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let spec = match &loaded {
                Ok(spec) => TaskSpec { mode, ..spec.clone() },
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    rows.push(BenchRow::crashed(fallback_name, mode));
                    continue;
                }
            };
            let run_id = format!("{batch}-{}-{}", spec.spec_id, mode);
            let title = spec.title.clone();
            match execute(&config, spec, run_id).and_then(|(run, _)| {
                BenchRow::from_run(&run).map_err(|e| usage(e.to_string()))
            }) {
                Ok(row) => rows.push(row),
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    rows.push(BenchRow::crashed(title, mode));
                }
            }
        }
    }

    let report = bench_report(&rows, survey.as_ref()).map_err(|e| usage(e.to_string()))?;
    let dir = config.outputs_dir().join(&batch);
    report.write_to(&dir).map_err(|e| usage(format!("cannot write report: {e}")))?;
    let _ = write!(out, "{}", report.text);
    let _ = writeln!(out, "\nreport: {}", dir.join("report.txt").display());
    let all_ok = rows.iter().all(|r| r.status == RunStatus::Succeeded);
    Ok(if all_ok { EXIT_OK } else { EXIT_RUN_FAILED })
}

/// Expands report arguments into run files: directories contribute every
/// `*.json` inside, bare ids resolve under the runs directory.
fn resolve_run_paths(args: &[String], config: &CliConfig) -> Result<Vec<PathBuf>, CliError> {
    let mut paths = Vec::new();
    for arg in args {
        let p = PathBuf::from(arg);
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(&p)
                .map_err(|e| usage(format!("cannot list {}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            if found.is_empty() {
                return Err(usage(format!("no run files in {}", p.display())));
            }
            paths.extend(found);
        } else if p.is_file() {
            paths.push(p);
        } else {
            let by_id = config.runs_dir().join(format!("{arg}.json"));
            if !by_id.is_file() {
                return Err(usage(format!("run file not found: {arg}")));
            }
            paths.push(by_id);
        }
    }
    Ok(paths)
}

pub fn cmd_report(args: &[String], flags: &CommonFlags, out: &mut dyn Write) -> Result<i32, CliError> {
    let config = CliConfig::resolve(flags)?;
    let survey = load_survey(&config)?;
    let mut rows = Vec::new();
    for path in resolve_run_paths(args, &config)? {
        let run = PipelineRun::load(&path).map_err(|e| usage(format!("bad run file {}: {e}", path.display())))?;
        rows.push(BenchRow::from_run(&run).map_err(|e| usage(format!("{}: {e}", path.display())))?);
    }
    let report = bench_report(&rows, survey.as_ref()).map_err(|e| usage(e.to_string()))?;
    let batch = config.run_id.clone().unwrap_or_else(|| "report".to_string());
    let dir = config.outputs_dir().join(batch);
    report.write_to(&dir).map_err(|e| usage(format!("cannot write report: {e}")))?;
    let _ = write!(out, "{}", report.text);
    let _ = writeln!(out, "\nreport: {}", dir.join("report.txt").display());
    Ok(EXIT_OK)
}
