//! Artifact validation, final integration and retry feedback.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::model::{
    monotonic_ms, AgentRole, Artifact, CheckMethod, CheckResult, CheckSpec, ContentKind,
    ModelError, PipelineRun, Task, TaskGraph, TaskKind, ValidationReport,
};

pub const DEFAULT_COMMAND_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, thiserror::Error)]
pub enum IntegrationError {
    #[error("missing artifact for task {0}")]
    MissingArtifact(String),
    #[error("report for {0} has no failed checks")]
    NoFailures(String),
    #[error(transparent)]
    Graph(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type ScriptFn = dyn Fn(&Artifact) -> (bool, String) + Send + Sync;

/// Named check scripts for `scripted` checks.
#[derive(Clone, Default)]
pub struct ScriptTable {
    scripts: HashMap<String, Arc<ScriptFn>>,
}

impl ScriptTable {
    pub fn new() -> ScriptTable {
        ScriptTable::default()
    }

    pub fn insert<F>(&mut self, name: impl Into<String>, script: F)
    where
        F: Fn(&Artifact) -> (bool, String) + Send + Sync + 'static,
    {
        self.scripts.insert(name.into(), Arc::new(script));
    }

    pub fn with<F>(mut self, name: impl Into<String>, script: F) -> ScriptTable
    where
        F: Fn(&Artifact) -> (bool, String) + Send + Sync + 'static,
    {
        self.insert(name, script);
        self
    }

    fn get(&self, name: &str) -> Option<&Arc<ScriptFn>> {
        self.scripts.get(name)
    }
}

impl std::fmt::Debug for ScriptTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.scripts.keys()).finish()
    }
}

/// Runs checks against artifacts.
#[derive(Debug, Clone)]
pub struct Validator {
    pub scripts: ScriptTable,
    pub command_timeout: Duration,
}

impl Default for Validator {
    fn default() -> Self {
        Validator {
            scripts: ScriptTable::default(),
            command_timeout: DEFAULT_COMMAND_TIMEOUT,
        }
    }
}

impl Validator {
    pub fn with_scripts(scripts: ScriptTable) -> Validator {
        Validator {
            scripts,
            ..Validator::default()
        }
    }

    /// Runs every check that applies to the artifact's kind. Check failures,
    /// including commands that cannot be spawned, are recorded in the report.
    pub fn validate(&self, artifact: &Artifact, checks: &[CheckSpec]) -> ValidationReport {
        let results = checks
            .iter()
            .filter(|c| c.applies(artifact.content_kind))
            .map(|check| {
                let (passed, detail) = match check.method {
                    CheckMethod::ContainsText => {
                        if artifact.content.contains(&check.argument) {
                            (true, format!("found {:?}", check.argument))
                        } else {
                            (false, format!("text {:?} not found", check.argument))
                        }
                    }
                    CheckMethod::ExternalCommand => self.run_command(&check.argument, artifact),
                    CheckMethod::Scripted => match self.scripts.get(&check.argument) {
                        Some(script) => script(artifact),
                        None => (false, format!("no script named {:?}", check.argument)),
                    },
                };
                CheckResult {
                    check_name: check.name.clone(),
                    passed,
                    detail,
                }
            })
            .collect();
        ValidationReport {
            artifact_id: artifact.artifact_id.clone(),
            task_id: artifact.task_id.clone(),
            results,
        }
    }

    /// `sh -c <command> check <task_id>` with the artifact on stdin; passes
    /// iff the exit status is 0 within the timeout.
    fn run_command(&self, command: &str, artifact: &Artifact) -> (bool, String) {
        let spawned = Command::new("sh")
            .arg("-c")
            .arg(command)
            .arg("check")
            .arg(&artifact.task_id)
            .stdin(Stdio::piped())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn();
        let mut child = match spawned {
            Ok(c) => c,
            Err(e) => return (false, format!("failed to spawn {command:?}: {e}")),
        };

        let mut stdin = child.stdin.take().expect("piped stdin");
        let content = artifact.content.clone();
        let writer = std::thread::spawn(move || {
            // The command may exit without reading its input.
            let _ = stdin.write_all(content.as_bytes());
        });
        let mut stderr = child.stderr.take().expect("piped stderr");
        let reader = std::thread::spawn(move || {
            let mut buf = String::new();
            let _ = stderr.read_to_string(&mut buf);
            buf
        });

        let deadline = Instant::now() + self.command_timeout;
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
                Ok(None) => std::thread::sleep(Duration::from_millis(5)),
                Err(e) => return (false, format!("wait failed: {e}")),
            }
        };
        let _ = writer.join();
        let err_text = reader.join().unwrap_or_default();
        let tail: String = err_text.trim().chars().rev().take(200).collect::<Vec<_>>().into_iter().rev().collect();

        match status {
            None => (false, format!("timed out after {:?}", self.command_timeout)),
            Some(s) if s.success() => (true, "exit status 0".into()),
            Some(s) => {
                let code = s.code().map_or("signal".to_string(), |c| c.to_string());
                if tail.is_empty() {
                    (false, format!("exit status {code}"))
                } else {
                    (false, format!("exit status {code}: {tail}"))
                }
            }
        }
    }
}

/// Validates with no scripts and the default command timeout.
pub fn validate_artifact(artifact: &Artifact, checks: &[CheckSpec]) -> ValidationReport {
    Validator::default().validate(artifact, checks)
}

/// Line-comment prefix used for non-code sections of the integrated text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommentStyle(pub &'static str);

impl CommentStyle {
    pub fn for_language(tag: &str) -> CommentStyle {
        match tag.to_ascii_lowercase().as_str() {
            "python" | "ruby" | "perl" | "r" | "sh" | "bash" | "shell" => CommentStyle("#"),
            "lua" | "sql" | "haskell" => CommentStyle("--"),
            _ => CommentStyle("//"),
        }
    }

    fn comment(self, text: &str) -> String {
        let mut out = String::new();
        for line in text.lines() {
            if line.is_empty() {
                out.push_str(self.0);
            } else {
                let _ = write!(out, "{} {}", self.0, line);
            }
            out.push('\n');
        }
        out
    }
}

pub fn section_delimiter(task_id: &str, role: AgentRole) -> String {
    format!("=== {task_id} ({role}) ===")
}

/// Concatenates the artifacts of every non-integrate task in topological
/// order. Code is copied verbatim; plans, schemas and reviews are
/// comment-prefixed. When a task has several artifacts the last one wins.
pub fn integrate(
    artifacts: &[Artifact],
    graph: &TaskGraph,
    style: CommentStyle,
) -> Result<Artifact, IntegrationError> {
    let latest: HashMap<&str, &Artifact> =
        artifacts.iter().map(|a| (a.task_id.as_str(), a)).collect();
    let integrate_task = graph.tasks().find(|t| t.kind == TaskKind::Integrate);

    let mut text = String::new();
    for id in graph.topo_order()? {
        let task = graph.get(id).expect("topo order yields graph ids");
        if task.kind == TaskKind::Integrate {
            continue;
        }
        let artifact = latest
            .get(id)
            .ok_or_else(|| IntegrationError::MissingArtifact(id.to_string()))?;
        if !text.is_empty() {
            text.push('\n');
        }
        text.push_str(&section_delimiter(id, artifact.role));
        text.push('\n');
        match artifact.content_kind {
            ContentKind::Code | ContentKind::IntegratedCode => {
                text.push_str(&artifact.content);
                if !artifact.content.ends_with('\n') {
                    text.push('\n');
                }
            }
            _ => text.push_str(&style.comment(&artifact.content)),
        }
    }

    let (task_id, attempt) = integrate_task
        .map(|t| (t.task_id.clone(), t.attempts.max(1)))
        .unwrap_or_else(|| ("integrate".to_string(), 1));
    Ok(Artifact {
        artifact_id: format!("{task_id}#{attempt}"),
        task_id,
        role: AgentRole::Orchestrator,
        content: text,
        content_kind: ContentKind::IntegratedCode,
        created_at: monotonic_ms(),
    })
}

/// Failed checks of one attempt, fed back into the retry prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureSummary {
    pub task_id: String,
    pub attempt: u32,
    pub failed_checks: Vec<(String, String)>,
}

impl FailureSummary {
    /// Summary for an attempt that failed before any check could run.
    pub fn from_error(task: &Task, name: &str, detail: impl Into<String>) -> FailureSummary {
        FailureSummary {
            task_id: task.task_id.clone(),
            attempt: task.attempts,
            failed_checks: vec![(name.to_string(), detail.into())],
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!("Attempt {} failed these checks:", self.attempt);
        for (name, detail) in &self.failed_checks {
            let _ = write!(out, "\n- {name}: {detail}");
        }
        out
    }
}

pub fn build_feedback(task: &Task, report: &ValidationReport) -> Result<FailureSummary, IntegrationError> {
    let failed_checks: Vec<(String, String)> = report
        .failed()
        .map(|r| (r.check_name.clone(), r.detail.clone()))
        .collect();
    if failed_checks.is_empty() {
        return Err(IntegrationError::NoFailures(report.artifact_id.clone()));
    }
    Ok(FailureSummary {
        task_id: task.task_id.clone(),
        attempt: task.attempts,
        failed_checks,
    })
}

/// Writes `<out_dir>/<run_id>/integrated.txt` plus one `<task_id>.txt` per
/// artifact. Returns the run's output directory.
pub fn write_run_outputs(run: &PipelineRun, out_dir: &Path) -> Result<PathBuf, IntegrationError> {
    let dir = out_dir.join(&run.run_id);
    std::fs::create_dir_all(&dir)?;
    for artifact in &run.artifacts {
        std::fs::write(dir.join(format!("{}.txt", artifact.task_id)), &artifact.content)?;
    }
    if let Some(final_artifact) = run.final_artifact() {
        std::fs::write(dir.join("integrated.txt"), &final_artifact.content)?;
    }
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TaskStatus;

    fn artifact(task_id: &str, role: AgentRole, content: &str) -> Artifact {
        Artifact {
            artifact_id: format!("{task_id}#1"),
            task_id: task_id.into(),
            role,
            content: content.into(),
            content_kind: role.content_kind(),
            created_at: 0,
        }
    }

    fn code_check(name: &str, method: CheckMethod, arg: &str) -> CheckSpec {
        CheckSpec::new(name, method, arg).applying_to([ContentKind::Code])
    }

    #[test]
    fn contains_text_passes() {
        let a = artifact("m1", AgentRole::Motor, "def move(self):\n    pass\n");
        let r = validate_artifact(&a, &[code_check("has-move", CheckMethod::ContainsText, "def move")]);
        assert_eq!(r.results.len(), 1);
        assert!(r.results[0].passed);
    }

    #[test]
    fn false_command_fails_with_status() {
        let a = artifact("m1", AgentRole::Motor, "x");
        let r = validate_artifact(&a, &[code_check("cmd", CheckMethod::ExternalCommand, "false")]);
        assert!(!r.results[0].passed);
        assert!(r.results[0].detail.contains("exit status 1"), "{}", r.results[0].detail);
    }

    #[test]
    fn command_reads_stdin_and_task_id() {
        let a = artifact("m7", AgentRole::Motor, "MOCK-IMPL m7\n");
        let r = validate_artifact(
            &a,
            &[code_check("grep", CheckMethod::ExternalCommand, "grep -q \"MOCK-IMPL $1\"")],
        );
        assert!(r.results[0].passed, "{}", r.results[0].detail);
    }

    #[test]
    fn command_timeout_marks_failure() {
        let v = Validator {
            command_timeout: Duration::from_millis(50),
            ..Validator::default()
        };
        let a = artifact("m1", AgentRole::Motor, "x");
        let r = v.validate(&a, &[code_check("slow", CheckMethod::ExternalCommand, "sleep 5")]);
        assert!(!r.results[0].passed);
        assert!(r.results[0].detail.contains("timed out"));
    }

    #[test]
    fn no_applicable_checks_gives_empty_report() {
        let a = artifact("plan", AgentRole::Prefrontal, "plan");
        let r = validate_artifact(&a, &[code_check("c", CheckMethod::ContainsText, "x")]);
        assert!(r.results.is_empty());
        assert!(validate_artifact(&a, &[]).results.is_empty());
    }

    #[test]
    fn scripted_lookup() {
        let v = Validator::with_scripts(ScriptTable::new().with("ok", |_| (true, "fine".into())));
        let a = artifact("m1", AgentRole::Motor, "x");
        let r = v.validate(
            &a,
            &[
                code_check("s1", CheckMethod::Scripted, "ok"),
                code_check("s2", CheckMethod::Scripted, "missing"),
            ],
        );
        assert!(r.results[0].passed);
        assert!(!r.results[1].passed);
    }

    fn small_graph() -> TaskGraph {
        let plan = Task::new("plan", TaskKind::Plan, "p").unwrap();
        let d1 = Task::new("d1", TaskKind::DataStructures, "d").unwrap().with_deps(["plan"]);
        let m1 = Task::new("m1", TaskKind::Implement, "m").unwrap().with_deps(["d1"]);
        let integ = Task::new("integrate", TaskKind::Integrate, "").unwrap().with_deps(["m1"]);
        TaskGraph::from_tasks([plan, d1, m1, integ]).unwrap()
    }

    #[test]
    fn sections_in_topological_order() {
        let arts = vec![
            artifact("m1", AgentRole::Motor, "fn m1() {}"),
            artifact("plan", AgentRole::Prefrontal, "the plan\n\nstep two"),
            artifact("d1", AgentRole::Parietal, "grid"),
        ];
        let out = integrate(&arts, &small_graph(), CommentStyle("//")).unwrap();
        assert_eq!(
            out.content,
            "=== plan (Prefrontal) ===\n// the plan\n//\n// step two\n\n\
             === d1 (Parietal) ===\n// grid\n\n\
             === m1 (Motor) ===\nfn m1() {}\n"
        );
        assert_eq!(out.content_kind, ContentKind::IntegratedCode);
        assert_eq!(out.task_id, "integrate");
    }

    #[test]
    fn missing_artifact_named() {
        let arts = vec![
            artifact("plan", AgentRole::Prefrontal, "p"),
            artifact("d1", AgentRole::Parietal, "d"),
        ];
        assert!(matches!(
            integrate(&arts, &small_graph(), CommentStyle("#")),
            Err(IntegrationError::MissingArtifact(id)) if id == "m1"
        ));
    }

    #[test]
    fn feedback_lists_failures() {
        let mut task = Task::new("m1", TaskKind::Implement, "").unwrap();
        task.status = TaskStatus::Running;
        task.attempts = 1;
        let report = ValidationReport {
            artifact_id: "m1#1".into(),
            task_id: "m1".into(),
            results: vec![
                CheckResult { check_name: "a".into(), passed: false, detail: "x".into() },
                CheckResult { check_name: "b".into(), passed: true, detail: "".into() },
                CheckResult { check_name: "c".into(), passed: false, detail: "y".into() },
            ],
        };
        let fb = build_feedback(&task, &report).unwrap();
        let names: Vec<_> = fb.failed_checks.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, vec!["a", "c"]);
        let text = fb.render();
        assert!(text.contains("- a: x") && text.contains("- c: y"));

        let clean = ValidationReport { results: vec![report.results[1].clone()], ..report };
        assert!(matches!(build_feedback(&task, &clean), Err(IntegrationError::NoFailures(_))));
    }

    #[test]
    fn comment_style_by_language() {
        assert_eq!(CommentStyle::for_language("Python"), CommentStyle("#"));
        assert_eq!(CommentStyle::for_language("cpp"), CommentStyle("//"));
        assert_eq!(CommentStyle::for_language("lua"), CommentStyle("--"));
    }
}
