#![allow(dead_code)]

use std::sync::Arc;

use cortexc_core::agents::{Backend, BackendConfig, MockBackend};
use cortexc_core::model::{AgentProfile, AgentRole, Mode, Task, TaskGraph, TaskKind, TaskSpec};
use cortexc_core::orchestrator::{Backends, OrchestratorConfig};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn spec(id: &str, title: &str, mode: Mode) -> TaskSpec {
    TaskSpec {
        spec_id: id.into(),
        title: title.into(),
        description: format!("{title} game"),
        target_language_tag: "python".into(),
        checks: vec![],
        mode,
    }
}

pub fn mock(seed: u64, latency_ms: u64) -> Backends {
    let backend: Arc<dyn Backend> = Arc::new(MockBackend::new(&BackendConfig::mock(seed).with_latency_ms(latency_ms)));
    Backends::new(backend)
}

pub fn motor_pool(agents: usize, capacity: u32, concurrency: usize) -> OrchestratorConfig {
    OrchestratorConfig {
        concurrency_limit: concurrency,
        agent_pool: (0..agents)
            .map(|i| AgentProfile::new(format!("motor-{i}"), AgentRole::Motor, capacity))
            .collect(),
        ..OrchestratorConfig::default()
    }
}

/// Random DAG of implement tasks; each node may depend on earlier nodes.
pub fn random_dag(rng: &mut StdRng, max_nodes: usize, edge_prob: f64) -> TaskGraph {
    let n = rng.random_range(1..=max_nodes);
    let mut graph = TaskGraph::new();
    for i in 0..n {
        let deps: Vec<String> = (0..i)
            .filter(|_| rng.random_bool(edge_prob))
            .map(|j| format!("t{j}"))
            .collect();
        graph
            .insert(Task::new(format!("t{i}"), TaskKind::Implement, format!("node {i}")).unwrap().with_deps(deps))
            .unwrap();
    }
    graph
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Longest chain (in nodes) from each node to a sink, by explicit path enumeration.
pub fn brute_force_priorities(graph: &TaskGraph) -> std::collections::BTreeMap<String, u32> {
    fn longest(graph: &TaskGraph, id: &str) -> u32 {
        1 + graph
            .tasks()
            .filter(|t| t.deps.contains(id))
            .map(|t| longest(graph, &t.task_id))
            .max()
            .unwrap_or(0)
    }
    graph.tasks().map(|t| (t.task_id.clone(), longest(graph, &t.task_id))).collect()
}
