use std::hint::black_box;
use std::sync::Arc;

use cortexc_bench::{motor_pool, random_dag};
use cortexc_core::agents::{BackendConfig, MockBackend};
use cortexc_core::comms::{Blackboard, MessageBus};
use cortexc_core::model::{Mode, TaskSpec};
use cortexc_core::orchestrator::{
    assign, compute_priorities, ready_set, Backends, NullSink, Orchestrator, OrchestratorConfig, RunRequest,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn priorities(c: &mut Criterion) {
    let mut group = c.benchmark_group("compute_priorities");
    for n in [10, 100, 500] {
        let graph = random_dag(n, 0.1, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &graph, |b, g| {
            b.iter(|| compute_priorities(black_box(g)).unwrap())
        });
    }
    group.finish();
}

fn ready_and_assign(c: &mut Criterion) {
    let graph = random_dag(200, 0.05, 2);
    c.bench_function("ready_set/200", |b| b.iter(|| ready_set(black_box(&graph))));
    let pool = motor_pool(16);
    let task = graph.tasks().next().unwrap().clone();
    c.bench_function("assign/16_agents", |b| b.iter(|| assign(black_box(&task), black_box(&pool)).unwrap()));
}

fn execute(c: &mut Criterion) {
    let spec = TaskSpec {
        spec_id: "bench".into(),
        title: "Bench".into(),
        description: "bench".into(),
        target_language_tag: String::new(),
        checks: vec![],
        mode: Mode::Modular,
    };
    let request = RunRequest { run_id: "bench".into(), spec, seed: 1 };
    let backend = Arc::new(MockBackend::new(&BackendConfig::mock(1).with_latency_ms(0)));
    let config = OrchestratorConfig {
        agent_pool: motor_pool(4),
        ..OrchestratorConfig::default()
    };
    let orch = Orchestrator::new(config, Backends::new(backend)).unwrap();
    let graph = random_dag(50, 0.1, 3);
    c.bench_function("execute_graph/50_nodes", |b| {
        b.iter(|| {
            orch.execute_graph(&request, graph.clone(), &MessageBus::new(), &Blackboard::new(), &mut NullSink)
                .unwrap()
        })
    });
}

criterion_group!(benches, priorities, ready_and_assign, execute);
criterion_main!(benches);
