//! The task orchestration agent: decomposition, critical-path priorities,
//! least-loaded assignment, analytics and the parallel run loop.

mod balance;
mod decompose;
mod events;
mod pipeline;
mod schedule;

pub use balance::{assign, update_analytics};
pub use decompose::{
    decompose, decompose_with, graph_from_plan, monolith_graph, plan_task, INTEGRATE_TASK_ID,
    MONOLITH_TASK_ID,
};
pub use events::{EventKind, EventSink, JsonLinesSink, NullSink, RunEvent};
pub use pipeline::{run_pipeline, Backends, Orchestrator, RunOutcome, RunRequest, COORDINATOR_ID};
pub use schedule::{apply_priorities, compute_priorities, ready_set};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::agents::{AgentError, BackendError};
use crate::comms::CommsError;
use crate::model::{AgentProfile, AgentRole, Mode, ModelError, DEFAULT_MAX_ATTEMPTS};

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("no agent for role {0}")]
    NoAgentForRole(AgentRole),
    #[error("invalid orchestrator config: {0}")]
    Config(String),
    #[error("agent failed on {task_id}: {detail}")]
    AgentFailed { task_id: String, detail: String },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Comms(#[from] CommsError),
    #[error("invalid graph: {0}")]
    Graph(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrchestratorConfig {
    pub concurrency_limit: usize,
    pub max_attempts: u32,
    pub ema_alpha: f64,
    pub agent_pool: Vec<AgentProfile>,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        OrchestratorConfig {
            concurrency_limit: 4,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            ema_alpha: 0.2,
            agent_pool: Vec::new(),
        }
    }
}

impl OrchestratorConfig {
    /// One agent of capacity 1 for each role the mode needs.
    pub fn with_default_pool(mode: Mode) -> OrchestratorConfig {
        OrchestratorConfig {
            agent_pool: OrchestratorConfig::required_roles(mode)
                .iter()
                .map(|r| AgentProfile::new(format!("{}-1", r.as_str().to_lowercase()), *r, 1))
                .collect(),
            ..OrchestratorConfig::default()
        }
    }

    pub fn required_roles(mode: Mode) -> &'static [AgentRole] {
        match mode {
            Mode::Modular => &[
                AgentRole::Prefrontal,
                AgentRole::Parietal,
                AgentRole::Temporal,
                AgentRole::Motor,
            ],
            Mode::Monolithic => &[AgentRole::Monolith],
        }
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: &str| Err(OrchestratorError::Config(m.to_string()));
        if self.concurrency_limit == 0 {
            return bad("concurrency_limit must be positive");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be positive");
        }
        if !(self.ema_alpha > 0.0 && self.ema_alpha <= 1.0) {
            return bad("ema_alpha must be in (0, 1]");
        }
        let mut ids = HashSet::new();
        for agent in &self.agent_pool {
            if agent.agent_id.is_empty() || agent.agent_id == COORDINATOR_ID {
                return bad("agent ids must be non-empty and not reserved");
            }
            if !ids.insert(agent.agent_id.as_str()) {
                return Err(OrchestratorError::Config(format!(
                    "duplicate agent id {}",
                    agent.agent_id
                )));
            }
            if agent.capacity == 0 {
                return bad("agent capacity must be positive");
            }
            if agent.role == AgentRole::Orchestrator {
                return bad("the orchestrator role is not an agent");
            }
        }
        Ok(())
    }

    /// Checks that every role `mode` needs has at least one agent.
    pub fn validate_for_mode(&self, mode: Mode) -> Result<(), OrchestratorError> {
        self.validate()?;
        for role in OrchestratorConfig::required_roles(mode) {
            if !self.agent_pool.iter().any(|a| a.role == *role) {
                return Err(OrchestratorError::NoAgentForRole(*role));
            }
        }
        Ok(())
    }
}
