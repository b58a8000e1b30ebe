use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{AgentRole, ContentKind, ModelError, TaskGraph, TaskSpec};

/// Milliseconds on a process-wide monotonic clock.
pub fn monotonic_ms() -> u64 {
    static ANCHOR: OnceLock<Instant> = OnceLock::new();
    ANCHOR.get_or_init(Instant::now).elapsed().as_millis() as u64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub artifact_id: String,
    pub task_id: String,
    pub role: AgentRole,
    pub content: String,
    pub content_kind: ContentKind,
    pub created_at: u64,
}

impl Artifact {
    /// Blackboard key the artifact is published under.
    pub fn board_key(&self) -> String {
        format!("{}/{}", self.task_id, self.content_kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check_name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub artifact_id: String,
    pub task_id: String,
    pub results: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.results.iter().filter(|r| !r.passed)
    }
}

/// Per-agent capacity and running performance figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub agent_id: String,
    pub role: AgentRole,
    pub capacity: u32,
    pub in_flight: u32,
    pub ema_latency_ms: f64,
    pub success_rate: f64,
    pub completed: u64,
    pub successes: u64,
}

impl AgentProfile {
    pub fn new(agent_id: impl Into<String>, role: AgentRole, capacity: u32) -> AgentProfile {
        AgentProfile {
            agent_id: agent_id.into(),
            role,
            capacity: capacity.max(1),
            in_flight: 0,
            ema_latency_ms: 0.0,
            success_rate: 0.0,
            completed: 0,
            successes: 0,
        }
    }

    pub fn has_capacity(&self) -> bool {
        self.in_flight < self.capacity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Succeeded,
    Failed,
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RunStatus::Succeeded => "succeeded",
            RunStatus::Failed => "failed",
        })
    }
}

/// Complete execution record of one pipeline run.
///
/// `finished_at_ms` is `None` while the run is still in progress.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub run_id: String,
    pub spec: TaskSpec,
    pub graph: TaskGraph,
    pub artifacts: Vec<Artifact>,
    pub reports: Vec<ValidationReport>,
    pub started_at_ms: u64,
    pub finished_at_ms: Option<u64>,
    pub status: RunStatus,
    pub seed: u64,
}

impl PipelineRun {
    pub fn is_finished(&self) -> bool {
        self.finished_at_ms.is_some()
    }

    /// The integrated (modular) or monolith artifact, if one was produced.
    pub fn final_artifact(&self) -> Option<&Artifact> {
        self.artifacts
            .iter()
            .rev()
            .find(|a| a.content_kind == ContentKind::IntegratedCode)
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<PipelineRun, ModelError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Writes `<dir>/<run_id>.json`, creating `dir` if needed.
    pub fn save(&self, dir: &Path) -> Result<PathBuf, ModelError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.json", self.run_id));
        fs::write(&path, self.to_json()?)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<PipelineRun, ModelError> {
        let text = fs::read_to_string(path)?;
        PipelineRun::from_json(&text)
    }
}

/// Inputs to the regularized cross-entropy utility: an N x M matrix of
/// predicted probabilities, a one-hot label matrix of the same shape, the
/// regularization weight and the squared L2 norm of the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossInput {
    pub probs: Vec<Vec<f64>>,
    pub labels: Vec<Vec<f64>>,
    pub lambda: f64,
    pub theta_sq_norm: f64,
}

/// Allowed deviation of a probability row sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

impl LossInput {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvariantViolation(msg));
        if self.probs.is_empty() {
            return bad("probs has no rows".into());
        }
        if self.probs.len() != self.labels.len() {
            return bad(format!(
                "probs has {} rows, labels has {}",
                self.probs.len(),
                self.labels.len()
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda {} is not a non-negative real", self.lambda));
        }
        if !(self.theta_sq_norm >= 0.0 && self.theta_sq_norm.is_finite()) {
            return bad(format!("theta_sq_norm {} is negative", self.theta_sq_norm));
        }
        let width = self.probs[0].len();
        for (i, (p, y)) in self.probs.iter().zip(&self.labels).enumerate() {
            if p.is_empty() || p.len() != width || y.len() != width {
                return bad(format!("row {i} has inconsistent width"));
            }
            if let Some(v) = p.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
                return bad(format!("row {i} has probability {v} outside (0, 1]"));
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return bad(format!("row {i} sums to {sum}"));
            }
            let ones = y.iter().filter(|v| **v == 1.0).count();
            let zeros = y.iter().filter(|v| **v == 0.0).count();
            if ones != 1 || ones + zeros != y.len() {
                return bad(format!("label row {i} is not one-hot"));
            }
        }
        Ok(())
    }
}
