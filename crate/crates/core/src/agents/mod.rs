//! Role-specific prompt pipelines over pluggable generation backends.

mod backend;
mod mock;
mod plan;
mod prompt;

pub use backend::{
    extract_content, invoke, AgentOutput, AgentRequest, Backend, BackendConfig, BackendError,
    BackendKind, HttpBackend, MockBackend, API_KEY_ENV, DEFAULT_MOCK_LATENCY_MS, DEFAULT_TIMEOUT_MS,
};
pub use mock::{mock_generate, MOCK_IMPL_MARKER};
pub use plan::{parse_plan, PlannedTask, FORMAT_REMINDER};
pub use prompt::{render_prompt, PromptBook, PromptTemplate, PLACEHOLDERS, PLAN_TASK_ID};

use crate::model::AgentRole;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error("missing context: {0}")]
    MissingContext(String),
    #[error("no prompt template for role {0}")]
    NoTemplate(AgentRole),
    #[error("bad template: {0}")]
    Template(String),
    #[error("malformed plan: {0}")]
    MalformedPlan(String),
    #[error("unknown subtask kind {0}")]
    UnknownKind(String),
    #[error("duplicate subtask id {0}")]
    DuplicateId(String),
}
