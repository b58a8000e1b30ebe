//! Shared value types and the task status machine.
//!
//! Everything here is a plain value: updates return new values rather than
//! mutating in place, so types can be cloned and sent across threads freely.

mod graph;
mod run;
mod spec;
mod task;

pub use graph::{validate_for_mode, validate_graph, TaskGraph};
pub use run::{
    monotonic_ms, AgentProfile, Artifact, CheckResult, LossInput, PipelineRun, RunStatus,
    ValidationReport, ROW_SUM_TOLERANCE,
};
pub use spec::{CheckMethod, CheckSpec, ContentKind, Mode, TaskSpec};
pub use task::{AgentRole, Task, TaskEvent, TaskKind, TaskStatus, DEFAULT_MAX_ATTEMPTS};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("illegal transition for task {task_id}: {event} while {status}")]
    IllegalTransition {
        task_id: String,
        status: TaskStatus,
        event: TaskEvent,
    },
    #[error("dependency cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("task {task_id} depends on missing task {missing}")]
    DanglingDependency { task_id: String, missing: String },
    #[error("task {task_id}: kind {kind} must be executed by {}, not {role}", kind.role())]
    RoleMismatch {
        task_id: String,
        kind: TaskKind,
        role: AgentRole,
    },
    #[error("graph key {key} does not match task id {task_id}")]
    KeyMismatch { key: String, task_id: String },
    #[error("{mode} graph must not have {found} integrate tasks")]
    IntegrateCount { mode: Mode, found: usize },
    #[error("duplicate task id {0}")]
    DuplicateTask(String),
    #[error("unknown task id {0}")]
    UnknownTask(String),
    #[error("{0} must not be empty")]
    EmptyId(&'static str),
    #[error("unknown role {0}")]
    UnknownRole(String),
    #[error("unknown mode {0}")]
    UnknownMode(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
