use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ContentKind, ModelError};

/// Default bound on dispatches per task.
pub const DEFAULT_MAX_ATTEMPTS: u32 = 3;

/// The agent role responsible for a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgentRole {
    Orchestrator,
    Prefrontal,
    Parietal,
    Temporal,
    Motor,
    Monolith,
}

impl AgentRole {
    pub const ALL: [AgentRole; 6] = [
        AgentRole::Orchestrator,
        AgentRole::Prefrontal,
        AgentRole::Parietal,
        AgentRole::Temporal,
        AgentRole::Motor,
        AgentRole::Monolith,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::Orchestrator => "Orchestrator",
            AgentRole::Prefrontal => "Prefrontal",
            AgentRole::Parietal => "Parietal",
            AgentRole::Temporal => "Temporal",
            AgentRole::Motor => "Motor",
            AgentRole::Monolith => "Monolith",
        }
    }

    /// Kind of artifact this role produces.
    pub fn content_kind(self) -> ContentKind {
        match self {
            AgentRole::Prefrontal => ContentKind::Plan,
            AgentRole::Parietal => ContentKind::Schema,
            AgentRole::Temporal => ContentKind::Review,
            AgentRole::Motor => ContentKind::Code,
            AgentRole::Orchestrator | AgentRole::Monolith => ContentKind::IntegratedCode,
        }
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AgentRole {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgentRole::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::UnknownRole(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Plan,
    DataStructures,
    LogicReview,
    Implement,
    Integrate,
    Monolith,
}

impl TaskKind {
    pub const ALL: [TaskKind; 6] = [
        TaskKind::Plan,
        TaskKind::DataStructures,
        TaskKind::LogicReview,
        TaskKind::Implement,
        TaskKind::Integrate,
        TaskKind::Monolith,
    ];

    /// The only role allowed to execute this kind.
    pub fn role(self) -> AgentRole {
        match self {
            TaskKind::Plan => AgentRole::Prefrontal,
            TaskKind::DataStructures => AgentRole::Parietal,
            TaskKind::LogicReview => AgentRole::Temporal,
            TaskKind::Implement => AgentRole::Motor,
            TaskKind::Integrate => AgentRole::Orchestrator,
            TaskKind::Monolith => AgentRole::Monolith,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Plan => "plan",
            TaskKind::DataStructures => "data_structures",
            TaskKind::LogicReview => "logic_review",
            TaskKind::Implement => "implement",
            TaskKind::Integrate => "integrate",
            TaskKind::Monolith => "monolith",
        }
    }

    pub fn parse(s: &str) -> Option<TaskKind> {
        TaskKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Pending,
    Ready,
    Running,
    Done,
    Failed,
}

impl TaskStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, TaskStatus::Done | TaskStatus::Failed)
    }
}

impl fmt::Display for TaskStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TaskStatus::Pending => "pending",
            TaskStatus::Ready => "ready",
            TaskStatus::Running => "running",
            TaskStatus::Done => "done",
            TaskStatus::Failed => "failed",
        };
        f.write_str(s)
    }
}

/// Inputs to the task status machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskEvent {
    DepsMet,
    Dispatched,
    Completed,
    CheckFailedRetry,
    Exhausted,
}

impl fmt::Display for TaskEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TaskEvent::DepsMet => "deps_met",
            TaskEvent::Dispatched => "dispatched",
            TaskEvent::Completed => "completed",
            TaskEvent::CheckFailedRetry => "check_failed_retry",
            TaskEvent::Exhausted => "exhausted",
        };
        f.write_str(s)
    }
}

/// One unit of schedulable work.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub kind: TaskKind,
    pub role: AgentRole,
    pub description: String,
    pub deps: BTreeSet<String>,
    pub priority: u32,
    pub status: TaskStatus,
    pub attempts: u32,
    pub max_attempts: u32,
}

impl Task {
    /// A fresh pending task whose role follows from `kind`.
    pub fn new(
        task_id: impl Into<String>,
        kind: TaskKind,
        description: impl Into<String>,
    ) -> Result<Task, ModelError> {
        let task_id = task_id.into();
        if task_id.is_empty() {
            return Err(ModelError::EmptyId("task_id"));
        }
        Ok(Task {
            task_id,
            kind,
            role: kind.role(),
            description: description.into(),
            deps: BTreeSet::new(),
            priority: 0,
            status: TaskStatus::Pending,
            attempts: 0,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        })
    }

    pub fn with_deps<I, S>(mut self, deps: I) -> Task
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.deps = deps.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_max_attempts(mut self, max_attempts: u32) -> Task {
        self.max_attempts = max_attempts.max(1);
        self
    }

    /// Applies `event` to the status machine, returning the updated task.
    ///
    /// Legal moves are `pending -> ready -> running -> {done, failed}` plus
    /// `running -> ready` on a retry while attempts remain. Dispatch bumps
    /// `attempts`.
    pub fn transition(&self, event: TaskEvent) -> Result<Task, ModelError> {
        use TaskEvent::*;
        use TaskStatus::*;

        let illegal = || ModelError::IllegalTransition {
            task_id: self.task_id.clone(),
            status: self.status,
            event,
        };
        let mut next = self.clone();
        match (self.status, event) {
            (Pending, DepsMet) => next.status = Ready,
            (Ready, Dispatched) => {
                if self.attempts >= self.max_attempts {
                    return Err(illegal());
                }
                next.attempts += 1;
                next.status = Running;
            }
            (Running, Completed) => next.status = Done,
            (Running, CheckFailedRetry) => {
                if self.attempts >= self.max_attempts {
                    return Err(illegal());
                }
                next.status = Ready;
            }
            (Running, Exhausted) => next.status = Failed,
            _ => return Err(illegal()),
        }
        Ok(next)
    }
}
