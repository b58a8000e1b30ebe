use std::collections::{BTreeMap, BTreeSet};

use crate::agents::{
    invoke, parse_plan, AgentError, AgentRequest, Backend, PlannedTask, PromptBook, FORMAT_REMINDER,
    PLAN_TASK_ID,
};
use crate::model::{
    validate_for_mode, AgentRole, Mode, Task, TaskGraph, TaskKind, TaskSpec, TaskStatus,
};

use super::schedule::apply_priorities;
use super::OrchestratorError;

pub const INTEGRATE_TASK_ID: &str = "integrate";
pub const MONOLITH_TASK_ID: &str = "monolith";

/// The root planning task for a modular run.
pub fn plan_task(spec: &TaskSpec, max_attempts: u32) -> Task {
    let mut t = Task::new(PLAN_TASK_ID, TaskKind::Plan, spec.description.clone())
        .expect("constant id")
        .with_max_attempts(max_attempts);
    t.priority = 1;
    t
}

/// Single-task graph for the monolithic baseline.
pub fn monolith_graph(spec: &TaskSpec, max_attempts: u32) -> TaskGraph {
    let mut t = Task::new(MONOLITH_TASK_ID, TaskKind::Monolith, spec.description.clone())
        .expect("constant id")
        .with_max_attempts(max_attempts);
    t.priority = 1;
    TaskGraph::from_tasks([t]).expect("single node")
}

/// Builds the modular graph: the plan root, the planned subtasks (rooted at
/// the plan when they list no dependencies), and one integrate task that
/// waits on every implement task and every sink.
pub fn graph_from_plan(
    spec: &TaskSpec,
    plan: Task,
    planned: &[PlannedTask],
    max_attempts: u32,
) -> Result<TaskGraph, OrchestratorError> {
    let plan_id = plan.task_id.clone();
    let mut graph = TaskGraph::new();
    graph.insert(plan)?;
    for p in planned {
        if p.id == plan_id || p.id == INTEGRATE_TASK_ID {
            return Err(AgentError::DuplicateId(p.id.clone()).into());
        }
        let deps: Vec<String> = if p.depends_on.is_empty() {
            vec![plan_id.clone()]
        } else {
            p.depends_on.clone()
        };
        let task = Task::new(p.id.clone(), p.kind, p.description.clone())?
            .with_deps(deps)
            .with_max_attempts(max_attempts);
        graph.insert(task)?;
    }

    let depended_on: BTreeSet<&str> = graph
        .tasks()
        .flat_map(|t| t.deps.iter().map(String::as_str))
        .collect();
    let integrate_deps: Vec<String> = graph
        .tasks()
        .filter(|t| t.kind == TaskKind::Implement || !depended_on.contains(t.task_id.as_str()))
        .map(|t| t.task_id.clone())
        .collect();
    let integrate = Task::new(
        INTEGRATE_TASK_ID,
        TaskKind::Integrate,
        format!("Integrate component outputs for {}", spec.title),
    )?
    .with_deps(integrate_deps)
    .with_max_attempts(max_attempts);
    graph.insert(integrate)?;

    validate_for_mode(&graph, Mode::Modular)?;
    apply_priorities(&mut graph)?;
    Ok(graph)
}

/// Asks `planner` for a plan and turns it into a task graph. An unparseable
/// plan is retried once with a format reminder. Monolithic specs skip the
/// planner entirely.
pub fn decompose(spec: &TaskSpec, planner: &dyn Backend) -> Result<TaskGraph, OrchestratorError> {
    decompose_with(spec, planner, &PromptBook::default(), crate::model::DEFAULT_MAX_ATTEMPTS)
}

pub fn decompose_with(
    spec: &TaskSpec,
    planner: &dyn Backend,
    prompts: &PromptBook,
    max_attempts: u32,
) -> Result<TaskGraph, OrchestratorError> {
    spec.validate()?;
    if spec.mode == Mode::Monolithic {
        return Ok(monolith_graph(spec, max_attempts));
    }
    let mut plan = plan_task(spec, max_attempts);
    let mut view = BTreeMap::new();
    let mut reprompted = false;
    loop {
        let prompt = prompts.render(AgentRole::Prefrontal, &plan, &view)?;
        let output = invoke(
            planner,
            &AgentRequest {
                role: AgentRole::Prefrontal,
                task: &plan,
                prompt: &prompt,
            },
        )?;
        plan.attempts += 1;
        if !output.ok {
            return Err(OrchestratorError::AgentFailed {
                task_id: plan.task_id.clone(),
                detail: output.error_detail.unwrap_or_default(),
            });
        }
        match parse_plan(&output.raw_text) {
            Ok(planned) => {
                plan.status = TaskStatus::Done;
                return graph_from_plan(spec, plan, &planned, max_attempts);
            }
            Err(e) if !reprompted => {
                reprompted = true;
                view.insert(
                    format!("{}/failure_summary", plan.task_id),
                    format!("- plan-format: {e}\n{FORMAT_REMINDER}"),
                );
            }
            Err(e) => return Err(e.into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{AgentOutput, AgentRequest, BackendConfig, BackendError, MockBackend};
    use std::sync::atomic::{AtomicU32, Ordering};

    fn spec(mode: Mode) -> TaskSpec {
        TaskSpec {
            spec_id: "pacman".into(),
            title: "Pacman".into(),
            description: "Pacman game".into(),
            target_language_tag: "python".into(),
            checks: vec![],
            mode,
        }
    }

    struct Canned {
        text: String,
        calls: AtomicU32,
    }

    impl Backend for Canned {
        fn invoke(&self, _r: &AgentRequest<'_>) -> Result<AgentOutput, BackendError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(AgentOutput::success(self.text.clone(), 0.0))
        }
    }

    fn canned(text: &str) -> Canned {
        Canned { text: text.into(), calls: AtomicU32::new(0) }
    }

    #[test]
    fn mock_planner_graph_shape() {
        let planner = MockBackend::new(&BackendConfig::mock(7).with_latency_ms(0));
        let g = decompose(&spec(Mode::Modular), &planner).unwrap();
        let ids: Vec<&str> = g.nodes.keys().map(String::as_str).collect();
        assert_eq!(ids, vec!["plan", "d1", "l1", "m1", "m2", "integrate"]);
        assert_eq!(g.get("plan").unwrap().status, TaskStatus::Done);
        let deps = |id: &str| g.get(id).unwrap().deps.iter().cloned().collect::<Vec<_>>();
        assert_eq!(deps("d1"), vec!["plan"]);
        assert_eq!(deps("m1"), vec!["d1", "l1"]);
        assert_eq!(deps("integrate"), vec!["m1", "m2"]);
        assert_eq!(g.get("plan").unwrap().priority, 4);
        assert_eq!(g.get("integrate").unwrap().priority, 1);
    }

    #[test]
    fn monolithic_is_single_node() {
        let planner = canned("unused");
        let g = decompose(&spec(Mode::Monolithic), &planner).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.tasks().next().unwrap().kind, TaskKind::Monolith);
        assert_eq!(planner.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn duplicate_ids_propagate() {
        let planner = canned(
            r#"{"subtasks":[
                {"id":"x","kind":"implement","description":"a","depends_on":[]},
                {"id":"x","kind":"implement","description":"b","depends_on":[]}]}"#,
        );
        assert!(matches!(
            decompose(&spec(Mode::Modular), &planner),
            Err(OrchestratorError::Agent(AgentError::DuplicateId(id))) if id == "x"
        ));
    }

    #[test]
    fn reserved_id_is_duplicate() {
        let planner = canned(r#"{"subtasks":[{"id":"plan","kind":"implement","description":"a","depends_on":[]}]}"#);
        assert!(matches!(
            decompose(&spec(Mode::Modular), &planner),
            Err(OrchestratorError::Agent(AgentError::DuplicateId(_)))
        ));
    }

    #[test]
    fn malformed_plan_reprompts_once() {
        let planner = canned("I would rather write prose.");
        assert!(matches!(
            decompose(&spec(Mode::Modular), &planner),
            Err(OrchestratorError::Agent(AgentError::MalformedPlan(_)))
        ));
        assert_eq!(planner.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn dangling_plan_dependency_is_graph_error() {
        let planner = canned(r#"{"subtasks":[{"id":"a","kind":"implement","description":"a","depends_on":["zz"]}]}"#);
        assert!(matches!(
            decompose(&spec(Mode::Modular), &planner),
            Err(OrchestratorError::Graph(_))
        ));
    }

    #[test]
    fn sinks_feed_integrate() {
        let planner = canned(
            r#"{"subtasks":[
                {"id":"r","kind":"logic_review","description":"a","depends_on":[]},
                {"id":"m","kind":"implement","description":"b","depends_on":[]}]}"#,
        );
        let g = decompose(&spec(Mode::Modular), &planner).unwrap();
        let deps: Vec<_> = g.get("integrate").unwrap().deps.iter().cloned().collect();
        assert_eq!(deps, vec!["m", "r"]);
    }
}
