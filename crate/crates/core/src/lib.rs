//! Multi-agent code generation: role agents coordinated by a dependency-aware
//! orchestrator over a message bus and a shared blackboard.

pub mod agents;
pub mod comms;
pub mod evaluation;
pub mod integration;
pub mod model;
pub mod orchestrator;

pub use agents::{AgentOutput, Backend, BackendConfig, BackendKind, MockBackend};
pub use comms::{Blackboard, MessageBus};
pub use model::{
    AgentProfile, AgentRole, Artifact, CheckMethod, CheckSpec, ContentKind, Mode, PipelineRun,
    RunStatus, Task, TaskGraph, TaskKind, TaskSpec, TaskStatus, ValidationReport,
};
pub use orchestrator::{Backends, Orchestrator, OrchestratorConfig, RunOutcome, RunRequest};
