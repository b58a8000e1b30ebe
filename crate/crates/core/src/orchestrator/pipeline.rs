use std::collections::HashMap;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::agents::{
    invoke, parse_plan, AgentOutput, AgentRequest, Backend, PromptBook, FORMAT_REMINDER,
};
use crate::comms::{Blackboard, Envelope, MessageBus, MessageKind};
use crate::integration::{build_feedback, integrate, CommentStyle, FailureSummary, Validator};
use crate::model::{
    monotonic_ms, validate_graph, AgentProfile, AgentRole, Artifact, Mode, PipelineRun,
    RunStatus, Task, TaskEvent, TaskGraph, TaskKind, TaskSpec, TaskStatus, ValidationReport,
};

use super::balance::{assign, update_analytics};
use super::decompose::{graph_from_plan, monolith_graph, plan_task};
use super::events::{EventKind, EventSink, RunEvent};
use super::schedule::ready_set;
use super::{OrchestratorConfig, OrchestratorError};

/// Bus id of the coordinator loop.
pub const COORDINATOR_ID: &str = "orchestrator";

const WORKER_POLL: Duration = Duration::from_millis(50);
const COORDINATOR_POLL: Duration = Duration::from_millis(200);

/// Backend per role, falling back to `default`.
#[derive(Clone)]
pub struct Backends {
    pub default: Arc<dyn Backend>,
    pub by_role: HashMap<AgentRole, Arc<dyn Backend>>,
}

impl Backends {
    pub fn new(default: Arc<dyn Backend>) -> Backends {
        Backends {
            default,
            by_role: HashMap::new(),
        }
    }

    pub fn with_role(mut self, role: AgentRole, backend: Arc<dyn Backend>) -> Backends {
        self.by_role.insert(role, backend);
        self
    }

    pub fn for_role(&self, role: AgentRole) -> &dyn Backend {
        self.by_role.get(&role).unwrap_or(&self.default).as_ref()
    }
}

#[derive(Debug, Clone)]
pub struct RunRequest {
    pub run_id: String,
    pub spec: TaskSpec,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run: PipelineRun,
    /// Final agent analytics.
    pub agents: Vec<AgentProfile>,
    /// Why the run failed, if it did.
    pub failure: Option<String>,
    pub dispatches: u32,
}

#[derive(Serialize, Deserialize)]
struct AssignPayload {
    task: Task,
    prompt: String,
}

#[derive(Serialize, Deserialize)]
struct ReplyPayload {
    agent_id: String,
    attempt: u32,
    output: AgentOutput,
}

pub struct Orchestrator {
    config: OrchestratorConfig,
    backends: Backends,
    validator: Validator,
    prompts: PromptBook,
}

impl Orchestrator {
    pub fn new(config: OrchestratorConfig, backends: Backends) -> Result<Orchestrator, OrchestratorError> {
        config.validate()?;
        Ok(Orchestrator {
            config,
            backends,
            validator: Validator::default(),
            prompts: PromptBook::default(),
        })
    }

    pub fn with_validator(mut self, validator: Validator) -> Orchestrator {
        self.validator = validator;
        self
    }

    pub fn with_prompts(mut self, prompts: PromptBook) -> Orchestrator {
        self.prompts = prompts;
        self
    }

    pub fn config(&self) -> &OrchestratorConfig {
        &self.config
    }

    /// Runs a spec end to end. Modular runs start from the plan task and
    /// expand the graph once the plan is accepted; monolithic runs are a
    /// single task.
    pub fn run_pipeline(
        &self,
        request: &RunRequest,
        bus: &MessageBus,
        board: &Blackboard,
        events: &mut dyn EventSink,
    ) -> Result<RunOutcome, OrchestratorError> {
        request.spec.validate()?;
        let max = self.config.max_attempts;
        let graph = match request.spec.mode {
            Mode::Modular => {
                TaskGraph::from_tasks([plan_task(&request.spec, max)])?
            }
            Mode::Monolithic => monolith_graph(&request.spec, max),
        };
        self.execute_graph(request, graph, bus, board, events)
    }

    /// Executes an already built graph. Plan tasks expand the graph when the
    /// run's spec is modular.
    pub fn execute_graph(
        &self,
        request: &RunRequest,
        graph: TaskGraph,
        bus: &MessageBus,
        board: &Blackboard,
        events: &mut dyn EventSink,
    ) -> Result<RunOutcome, OrchestratorError> {
        validate_graph(&graph)?;
        bus.register(COORDINATOR_ID);
        for agent in &self.config.agent_pool {
            bus.register(&agent.agent_id);
        }

        thread::scope(|scope| {
            for agent in &self.config.agent_pool {
                for _ in 0..agent.capacity {
                    let agent_id = agent.agent_id.as_str();
                    scope.spawn(move || self.worker(agent_id, bus));
                }
            }
            let mut run = RunState::new(self, request, graph, board, events);
            let result = run.drive(bus);
            for agent in &self.config.agent_pool {
                for _ in 0..agent.capacity {
                    let _ = bus.send(Envelope::new(
                        COORDINATOR_ID,
                        &agent.agent_id,
                        MessageKind::Control,
                        "",
                        "shutdown",
                    ));
                }
            }
            result.map(|()| run.finish())
        })
    }

    fn worker(&self, agent_id: &str, bus: &MessageBus) {
        loop {
            let msg = match bus.receive(agent_id, WORKER_POLL) {
                Ok(Some(msg)) => msg,
                Ok(None) => continue,
                Err(_) => return,
            };
            match msg.kind {
                MessageKind::Control => return,
                MessageKind::Assign => {}
                _ => continue,
            }
            let started = Instant::now();
            let (task_id, attempt, output) = match serde_json::from_str::<AssignPayload>(&msg.payload) {
                Ok(p) => {
                    let request = AgentRequest {
                        role: p.task.role,
                        task: &p.task,
                        prompt: &p.prompt,
                    };
                    let output = invoke(self.backends.for_role(p.task.role), &request)
                        .unwrap_or_else(|e| AgentOutput::failure(e.to_string(), elapsed_ms(started)));
                    (p.task.task_id.clone(), p.task.attempts, output)
                }
                Err(e) => (
                    msg.task_id.clone(),
                    0,
                    AgentOutput::failure(format!("bad assign payload: {e}"), 0.0),
                ),
            };
            let kind = if output.ok { MessageKind::Result } else { MessageKind::Error };
            let reply = ReplyPayload {
                agent_id: agent_id.to_string(),
                attempt,
                output,
            };
            let payload = serde_json::to_string(&reply).expect("reply serializes");
            let sent = bus.send(Envelope::new(agent_id, COORDINATOR_ID, kind, &task_id, payload));
            if let Err(e) = sent {
                let fallback = ReplyPayload {
                    agent_id: agent_id.to_string(),
                    attempt,
                    output: AgentOutput::failure(e.to_string(), reply.output.latency_ms),
                };
                let payload = serde_json::to_string(&fallback).expect("reply serializes");
                let _ = bus.send(Envelope::new(agent_id, COORDINATOR_ID, MessageKind::Error, &task_id, payload));
            }
        }
    }
}

fn elapsed_ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Coordinator state. Only the coordinator thread touches it.
struct RunState<'a> {
    orch: &'a Orchestrator,
    request: &'a RunRequest,
    board: &'a Blackboard,
    events: &'a mut dyn EventSink,
    graph: TaskGraph,
    agents: Vec<AgentProfile>,
    running: HashMap<String, String>,
    artifacts: IndexMap<String, Artifact>,
    reports: Vec<(u32, ValidationReport)>,
    failure: Option<String>,
    dispatches: u32,
    plan_reprompted: bool,
    clock: Instant,
    started_at_ms: u64,
}

enum Verdict {
    Accept,
    Retry(FailureSummary),
    Fail(String),
}

impl<'a> RunState<'a> {
    fn new(
        orch: &'a Orchestrator,
        request: &'a RunRequest,
        graph: TaskGraph,
        board: &'a Blackboard,
        events: &'a mut dyn EventSink,
    ) -> RunState<'a> {
        RunState {
            orch,
            request,
            board,
            events,
            graph,
            agents: orch.config.agent_pool.clone(),
            running: HashMap::new(),
            artifacts: IndexMap::new(),
            reports: Vec::new(),
            failure: None,
            dispatches: 0,
            plan_reprompted: false,
            clock: Instant::now(),
            started_at_ms: monotonic_ms(),
        }
    }

    fn emit(&mut self, event: EventKind, task_id: &str, agent_id: &str, detail: impl Into<String>) {
        let ts_ms = elapsed_ms(self.clock);
        self.events.emit(RunEvent {
            ts_ms,
            event,
            task_id: task_id.to_string(),
            agent_id: agent_id.to_string(),
            detail: detail.into(),
        });
    }

    fn drive(&mut self, bus: &MessageBus) -> Result<(), OrchestratorError> {
        loop {
            if self.failure.is_none() {
                self.dispatch(bus)?;
            }
            if self.running.is_empty() {
                if self.failure.is_none() && !self.graph.is_finished() {
                    let stuck: Vec<String> = self
                        .graph
                        .tasks()
                        .filter(|t| !t.status.is_terminal())
                        .map(|t| t.task_id.clone())
                        .collect();
                    let detail = format!("graph-stall: no runnable task among {}", stuck.join(", "));
                    self.emit(EventKind::Stalled, "", COORDINATOR_ID, detail.clone());
                    self.failure = Some(detail);
                }
                return Ok(());
            }
            let Some(first) = bus.receive(COORDINATOR_ID, COORDINATOR_POLL)? else {
                continue;
            };
            self.on_reply(first);
            while let Some(msg) = bus.receive(COORDINATOR_ID, Duration::ZERO)? {
                self.on_reply(msg);
            }
        }
    }

    fn dispatch_order(&self) -> Vec<String> {
        let mut ready = ready_set(&self.graph);
        ready.sort_by_key(|id| {
            let t = self.graph.get(id).expect("ready ids exist");
            (std::cmp::Reverse(t.priority), self.graph.index_of(id))
        });
        ready
    }

    fn dispatch(&mut self, bus: &MessageBus) -> Result<(), OrchestratorError> {
        loop {
            let mut ran_locally = false;
            for id in self.dispatch_order() {
                if self.failure.is_some() {
                    return Ok(());
                }
                let task = self.graph.get(&id).expect("ready ids exist").clone();
                if task.kind == TaskKind::Integrate {
                    self.run_integrate(task)?;
                    ran_locally = true;
                    continue;
                }
                if self.running.len() >= self.orch.config.concurrency_limit {
                    break;
                }
                let agent_id = match assign(&task, &self.agents) {
                    Ok(Some(a)) => a.to_string(),
                    Ok(None) => continue,
                    Err(e) => {
                        self.emit(EventKind::Failed, &id, COORDINATOR_ID, e.to_string());
                        self.failure = Some(e.to_string());
                        return Ok(());
                    }
                };
                let task = self.start(task)?;
                let prompt = match self.render(&task) {
                    Ok(p) => p,
                    Err(detail) => {
                        self.settle(task, None, Verdict::Fail(detail))?;
                        continue;
                    }
                };
                let payload = serde_json::to_string(&AssignPayload {
                    task: task.clone(),
                    prompt,
                })
                .expect("assign serializes");
                let sent = bus.send(Envelope::new(COORDINATOR_ID, &agent_id, MessageKind::Assign, &id, payload));
                if let Err(e) = sent {
                    self.settle(task, None, Verdict::Fail(e.to_string()))?;
                    continue;
                }
                self.agent_mut(&agent_id).in_flight += 1;
                self.running.insert(id.clone(), agent_id.clone());
                self.dispatches += 1;
                self.emit(EventKind::Dispatched, &id, &agent_id, format!("attempt {}", task.attempts));
            }
            if !ran_locally {
                return Ok(());
            }
        }
    }

    /// Moves a ready (or pending) task to running.
    fn start(&mut self, task: Task) -> Result<Task, OrchestratorError> {
        let task = if task.status == TaskStatus::Pending {
            task.transition(TaskEvent::DepsMet)?
        } else {
            task
        };
        let task = task.transition(TaskEvent::Dispatched)?;
        self.graph.replace(task.clone())?;
        Ok(task)
    }

    fn agent_mut(&mut self, agent_id: &str) -> &mut AgentProfile {
        self.agents
            .iter_mut()
            .find(|a| a.agent_id == agent_id)
            .expect("agent ids come from the pool")
    }

    /// Upstream outputs plus this task's own feedback, if any.
    fn render(&self, task: &Task) -> Result<String, String> {
        let mut keys: Vec<String> = self
            .graph
            .ancestors(&task.task_id)
            .into_iter()
            .filter_map(|a| self.graph.get(&a).map(|t| format!("{a}/{}", t.role.content_kind())))
            .collect();
        keys.push(format!("{}/failure_summary", task.task_id));
        let view = self.board.view(keys.iter().map(String::as_str));
        self.orch
            .prompts
            .render(task.role, task, &view)
            .map_err(|e| e.to_string())
    }

    fn run_integrate(&mut self, task: Task) -> Result<(), OrchestratorError> {
        let task = self.start(task)?;
        self.dispatches += 1;
        self.emit(EventKind::Dispatched, &task.task_id, COORDINATOR_ID, format!("attempt {}", task.attempts));
        let artifacts: Vec<Artifact> = self.artifacts.values().cloned().collect();
        let style = CommentStyle::for_language(&self.request.spec.target_language_tag);
        match integrate(&artifacts, &self.graph, style) {
            Ok(artifact) => {
                let verdict = self.accept_artifact(&task, artifact, COORDINATOR_ID);
                self.settle(task, None, verdict)
            }
            Err(e) => self.settle(task, None, Verdict::Fail(e.to_string())),
        }
    }

    fn on_reply(&mut self, msg: crate::comms::Message) {
        let Ok(reply) = serde_json::from_str::<ReplyPayload>(&msg.payload) else {
            return;
        };
        if self.running.get(&msg.task_id) != Some(&reply.agent_id) {
            return;
        }
        self.running.remove(&msg.task_id);
        let Some(task) = self.graph.get(&msg.task_id).cloned() else {
            return;
        };
        if task.attempts != reply.attempt || task.status != TaskStatus::Running {
            return;
        }
        let output = reply.output;
        let verdict = if output.ok {
            let artifact = Artifact {
                artifact_id: format!("{}#{}", task.task_id, task.attempts),
                task_id: task.task_id.clone(),
                role: task.role,
                content: output.raw_text.clone(),
                content_kind: task.role.content_kind(),
                created_at: monotonic_ms(),
            };
            self.accept_artifact(&task, artifact, &reply.agent_id)
        } else {
            let detail = output.error_detail.clone().unwrap_or_else(|| "backend failure".into());
            Verdict::Retry(FailureSummary::from_error(&task, "backend", detail))
        };
        let accepted = matches!(verdict, Verdict::Accept);
        let alpha = self.orch.config.ema_alpha;
        let agent = self.agent_mut(&reply.agent_id);
        agent.in_flight = agent.in_flight.saturating_sub(1);
        *agent = update_analytics(agent, output.latency_ms, accepted, alpha);
        if let Err(e) = self.settle(task, Some(&reply.agent_id), verdict) {
            self.failure.get_or_insert(e.to_string());
        }
    }

    /// Publishes and validates an artifact. Plans must also parse.
    fn accept_artifact(&mut self, task: &Task, artifact: Artifact, writer: &str) -> Verdict {
        if let Err(e) = self.board.write(&artifact.board_key(), &artifact.content, writer) {
            return Verdict::Retry(FailureSummary::from_error(task, "publish", e.to_string()));
        }
        let report = self.orch.validator.validate(&artifact, &self.request.spec.checks);
        self.artifacts.insert(task.task_id.clone(), artifact);
        self.reports.push((task.attempts, report.clone()));

        if task.kind == TaskKind::Plan && self.request.spec.mode == Mode::Modular {
            if let Err(e) = parse_plan(&self.artifacts[&task.task_id].content) {
                if self.plan_reprompted {
                    return Verdict::Fail(e.to_string());
                }
                self.plan_reprompted = true;
                let mut summary = FailureSummary::from_error(task, "plan-format", e.to_string());
                summary.failed_checks.push(("format".into(), FORMAT_REMINDER.into()));
                return Verdict::Retry(summary);
            }
        }
        if report.all_passed() {
            Verdict::Accept
        } else {
            match build_feedback(task, &report) {
                Ok(summary) => Verdict::Retry(summary),
                Err(e) => Verdict::Fail(e.to_string()),
            }
        }
    }

    fn settle(&mut self, task: Task, agent_id: Option<&str>, verdict: Verdict) -> Result<(), OrchestratorError> {
        let agent = agent_id.unwrap_or(COORDINATOR_ID).to_string();
        let id = task.task_id.clone();
        match verdict {
            Verdict::Accept => {
                let done = task.transition(TaskEvent::Completed)?;
                self.graph.replace(done.clone())?;
                self.emit(EventKind::Completed, &id, &agent, format!("attempt {}", done.attempts));
                if done.kind == TaskKind::Plan && self.request.spec.mode == Mode::Modular {
                    self.expand_plan(done);
                }
            }
            Verdict::Retry(summary) if task.attempts < task.max_attempts => {
                let rendered = summary.render();
                if let Err(e) = self.board.write(&format!("{id}/failure_summary"), &rendered, COORDINATOR_ID) {
                    return self.settle(task, agent_id, Verdict::Fail(e.to_string()));
                }
                let retry = task.transition(TaskEvent::CheckFailedRetry)?;
                self.graph.replace(retry)?;
                self.emit(EventKind::Retried, &id, &agent, rendered);
            }
            Verdict::Retry(summary) => {
                let detail = format!("retries exhausted after {} attempts: {}", task.attempts, summary.render());
                return self.settle(task, agent_id, Verdict::Fail(detail));
            }
            Verdict::Fail(detail) => {
                let failed = task.transition(TaskEvent::Exhausted)?;
                self.graph.replace(failed)?;
                self.emit(EventKind::Failed, &id, &agent, detail.clone());
                self.failure.get_or_insert(format!("task {id} failed: {detail}"));
            }
        }
        Ok(())
    }

    /// Replaces the single-node plan graph with the full decomposition.
    fn expand_plan(&mut self, plan: Task) {
        let planned = parse_plan(&self.artifacts[&plan.task_id].content).expect("accepted plans parse");
        match graph_from_plan(&self.request.spec, plan, &planned, self.orch.config.max_attempts) {
            Ok(graph) => self.graph = graph,
            Err(e) => {
                let detail = format!("graph-invalid: {e}");
                self.emit(EventKind::Failed, crate::agents::PLAN_TASK_ID, COORDINATOR_ID, detail.clone());
                self.failure.get_or_insert(detail);
            }
        }
    }

    fn finish(self) -> RunOutcome {
        let order = |task_id: &str| self.graph.index_of(task_id).unwrap_or(usize::MAX);
        let mut artifacts: Vec<Artifact> = self.artifacts.into_values().collect();
        artifacts.sort_by_key(|a| order(&a.task_id));
        let mut reports = self.reports;
        reports.sort_by(|(a1, r1), (a2, r2)| (order(&r1.task_id), a1).cmp(&(order(&r2.task_id), a2)));
        let succeeded = self.failure.is_none() && self.graph.is_finished()
            && self.graph.tasks().all(|t| t.status == TaskStatus::Done);
        let run = PipelineRun {
            run_id: self.request.run_id.clone(),
            spec: self.request.spec.clone(),
            graph: self.graph,
            artifacts,
            reports: reports.into_iter().map(|(_, r)| r).collect(),
            started_at_ms: self.started_at_ms,
            finished_at_ms: Some(monotonic_ms().max(self.started_at_ms)),
            status: if succeeded { RunStatus::Succeeded } else { RunStatus::Failed },
            seed: self.request.seed,
        };
        RunOutcome {
            run,
            agents: self.agents,
            failure: self.failure,
            dispatches: self.dispatches,
        }
    }
}

/// One-shot convenience wrapper with default validator and prompts.
pub fn run_pipeline(
    request: &RunRequest,
    config: &OrchestratorConfig,
    backends: &Backends,
    bus: &MessageBus,
    board: &Blackboard,
) -> Result<PipelineRun, OrchestratorError> {
    let orch = Orchestrator::new(config.clone(), backends.clone())?;
    let mut sink = super::events::NullSink;
    Ok(orch.run_pipeline(request, bus, board, &mut sink)?.run)
}
