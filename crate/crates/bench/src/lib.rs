//! Workload generators shared by the benchmarks.

use cortexc_core::model::{AgentProfile, AgentRole, Task, TaskGraph, TaskKind};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Layered random DAG of implement tasks: `n` nodes, each depending on each
/// earlier node with probability `p`.
pub fn random_dag(n: usize, p: f64, seed: u64) -> TaskGraph {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut graph = TaskGraph::new();
    for i in 0..n {
        let deps: Vec<String> = (0..i).filter(|_| rng.random_bool(p)).map(|j| format!("t{j}")).collect();
        graph
            .insert(Task::new(format!("t{i}"), TaskKind::Implement, "bench").unwrap().with_deps(deps))
            .unwrap();
    }
    graph
}

pub fn motor_pool(n: usize) -> Vec<AgentProfile> {
    (0..n)
        .map(|i| AgentProfile::new(format!("motor-{i}"), AgentRole::Motor, 1))
        .collect()
}
