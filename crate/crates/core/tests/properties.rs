mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Duration;

use cortexc_core::agents::{mock_generate, parse_plan, render_prompt, PLAN_TASK_ID};
use cortexc_core::comms::{Envelope, MessageBus, MessageKind};
use cortexc_core::evaluation::regularized_cross_entropy;
use cortexc_core::model::{
    validate_graph, AgentRole, Artifact, CheckResult, ContentKind, LossInput, Mode, ModelError,
    PipelineRun, RunStatus, Task, TaskEvent, TaskGraph, TaskKind, TaskSpec, TaskStatus,
    ValidationReport,
};
use cortexc_core::orchestrator::compute_priorities;
use proptest::prelude::*;

fn event_strategy() -> impl Strategy<Value = TaskEvent> {
    prop_oneof![
        Just(TaskEvent::DepsMet),
        Just(TaskEvent::Dispatched),
        Just(TaskEvent::Completed),
        Just(TaskEvent::CheckFailedRetry),
        Just(TaskEvent::Exhausted),
    ]
}

/// Independent statement of the legal moves.
fn oracle(status: TaskStatus, attempts: u32, max: u32, event: TaskEvent) -> Option<(TaskStatus, u32)> {
    use TaskEvent as E;
    use TaskStatus as S;
    match (status, event) {
        (S::Pending, E::DepsMet) => Some((S::Ready, attempts)),
        (S::Ready, E::Dispatched) if attempts < max => Some((S::Running, attempts + 1)),
        (S::Running, E::Completed) => Some((S::Done, attempts)),
        (S::Running, E::CheckFailedRetry) if attempts < max => Some((S::Ready, attempts)),
        (S::Running, E::Exhausted) => Some((S::Failed, attempts)),
        _ => None,
    }
}

/// Edge list over `n` nodes; `(a, b)` means a depends on b.
fn edges_strategy(max_nodes: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1..=max_nodes).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..(n * 2))))
}

fn graph_from_edges(n: usize, edges: &[(usize, usize)]) -> TaskGraph {
    let mut deps: Vec<BTreeSet<String>> = vec![BTreeSet::new(); n];
    for &(a, b) in edges {
        deps[a].insert(format!("n{b}"));
    }
    TaskGraph::from_tasks(
        (0..n).map(|i| Task::new(format!("n{i}"), TaskKind::Implement, "x").unwrap().with_deps(deps[i].clone())),
    )
    .unwrap()
}

/// Brute force: a cycle exists iff some node reaches itself.
fn has_cycle(n: usize, edges: &[(usize, usize)]) -> bool {
    (0..n).any(|start| {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<usize> = edges.iter().filter(|e| e.0 == start).map(|e| e.1).collect();
        while let Some(x) = stack.pop() {
            if x == start {
                return true;
            }
            if seen.insert(x) {
                stack.extend(edges.iter().filter(|e| e.0 == x).map(|e| e.1));
            }
        }
        false
    })
}

fn dag_strategy(max_nodes: usize) -> impl Strategy<Value = TaskGraph> {
    edges_strategy(max_nodes).prop_map(|(n, edges)| {
        let forward: Vec<(usize, usize)> = edges
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a.max(b), a.min(b)))
            .collect();
        graph_from_edges(n, &forward)
    })
}

fn prob_row(width: usize) -> impl Strategy<Value = (Vec<f64>, usize)> {
    (prop::collection::vec(0.01f64..1.0, width), 0..width).prop_map(|(w, label)| {
        let total: f64 = w.iter().sum();
        (w.iter().map(|x| x / total).collect(), label)
    })
}

fn loss_strategy() -> impl Strategy<Value = LossInput> {
    (1usize..6, 1usize..6)
        .prop_flat_map(|(n, m)| {
            (prop::collection::vec(prob_row(m), n), 0.0f64..2.0, 0.0f64..5.0)
        })
        .prop_map(|(rows, lambda, theta_sq_norm)| {
            let m = rows[0].0.len();
            let labels = rows
                .iter()
                .map(|(_, l)| (0..m).map(|j| if j == *l { 1.0 } else { 0.0 }).collect())
                .collect();
            LossInput {
                probs: rows.into_iter().map(|(p, _)| p).collect(),
                labels,
                lambda,
                theta_sq_norm,
            }
        })
}

fn nll_oracle(input: &LossInput) -> f64 {
    let mut total = 0.0;
    for (p, y) in input.probs.iter().zip(&input.labels) {
        let j = y.iter().position(|v| *v == 1.0).unwrap();
        total += -p[j].ln();
    }
    total / input.probs.len() as f64
}

fn task_for(kind: TaskKind, desc: &str) -> Task {
    Task::new("t1", kind, desc).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn status_machine_matches_oracle(max in 1u32..5, events in prop::collection::vec(event_strategy(), 0..40)) {
        let mut task = Task::new("t", TaskKind::Implement, "x").unwrap().with_max_attempts(max);
        for event in events {
            let before = (task.status, task.attempts);
            match (task.transition(event), oracle(task.status, task.attempts, max, event)) {
                (Ok(next), Some((status, attempts))) => {
                    prop_assert_eq!((next.status, next.attempts), (status, attempts));
                    task = next;
                }
                (Err(ModelError::IllegalTransition { .. }), None) => {
                    prop_assert_eq!((task.status, task.attempts), before);
                }
                (got, want) => prop_assert!(false, "{:?} vs {:?}", got.map(|t| t.status), want),
            }
            prop_assert!(task.attempts <= max);
        }
    }

    #[test]
    fn validate_graph_agrees_with_brute_force((n, edges) in edges_strategy(8)) {
        let graph = graph_from_edges(n, &edges);
        let cyclic = has_cycle(n, &edges);
        match validate_graph(&graph) {
            Ok(()) => prop_assert!(!cyclic),
            Err(ModelError::Cycle(ids)) => {
                prop_assert!(cyclic);
                // The reported ids form a real cycle: each depends on the next.
                prop_assert!(!ids.is_empty());
                for (i, id) in ids.iter().enumerate() {
                    let next = &ids[(i + 1) % ids.len()];
                    prop_assert!(graph.get(id).unwrap().deps.contains(next), "{:?}", ids);
                }
            }
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
        prop_assert_eq!(graph.topo_order().is_ok(), !cyclic);
    }

    #[test]
    fn priorities_match_longest_path(graph in dag_strategy(10)) {
        let got = compute_priorities(&graph).unwrap();
        prop_assert_eq!(got, common::brute_force_priorities(&graph));
    }

    #[test]
    fn topo_order_respects_deps(graph in dag_strategy(12)) {
        let order = graph.topo_order().unwrap();
        let pos: HashMap<&str, usize> = order.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        prop_assert_eq!(order.len(), graph.len());
        for t in graph.tasks() {
            for d in &t.deps {
                prop_assert!(pos[d.as_str()] < pos[t.task_id.as_str()]);
            }
        }
    }

    #[test]
    fn loss_matches_nll_oracle(input in loss_strategy()) {
        let zero = LossInput { lambda: 0.0, ..input.clone() };
        let plain = regularized_cross_entropy(&zero).unwrap();
        prop_assert!((plain - nll_oracle(&input)).abs() < 1e-9);
        let full = regularized_cross_entropy(&input).unwrap();
        prop_assert!((full - plain - input.lambda * input.theta_sq_norm).abs() < 1e-9);
    }

    #[test]
    fn loss_decreases_as_true_prob_rises(input in loss_strategy(), row in 0usize..6, step in 0.05f64..0.95) {
        let row = row % input.probs.len();
        let j = input.labels[row].iter().position(|v| *v == 1.0).unwrap();
        if input.probs[row][j] < 1.0 - 1e-6 {
            let mut better = input.clone();
            for (k, p) in better.probs[row].iter_mut().enumerate() {
                *p = if k == j { *p + step * (1.0 - *p) } else { *p * (1.0 - step) };
            }
            let sum: f64 = better.probs[row].iter().sum();
            prop_assume!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(regularized_cross_entropy(&better).unwrap() < regularized_cross_entropy(&input).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bus_is_fifo_per_pair(history in prop::collection::vec((0usize..4, 0usize..3), 1000)) {
        let bus = MessageBus::new();
        let senders = ["s0", "s1", "s2", "s3"];
        let recipients = ["r0", "r1", "r2"];
        for id in senders.iter().chain(&recipients) {
            bus.register(id);
        }
        let mut sent: BTreeMap<(usize, usize), Vec<String>> = BTreeMap::new();
        for (i, (s, r)) in history.iter().enumerate() {
            let payload = format!("m{i}");
            let seq = bus
                .send(Envelope::new(senders[*s], recipients[*r], MessageKind::Assign, "t", payload.clone()))
                .unwrap();
            let log = sent.entry((*s, *r)).or_default();
            log.push(payload);
            prop_assert_eq!(seq, log.len() as u64);
        }
        for (ri, r) in recipients.iter().enumerate() {
            let mut got: BTreeMap<usize, Vec<(u64, String)>> = BTreeMap::new();
            while let Some(m) = bus.receive(r, Duration::ZERO).unwrap() {
                let si = senders.iter().position(|s| *s == m.sender).unwrap();
                got.entry(si).or_default().push((m.seq, m.payload));
            }
            for (si, msgs) in got {
                let expected = &sent[&(si, ri)];
                let payloads: Vec<&String> = msgs.iter().map(|(_, p)| p).collect();
                prop_assert_eq!(payloads, expected.iter().collect::<Vec<_>>());
                let seqs: Vec<u64> = msgs.iter().map(|(s, _)| *s).collect();
                prop_assert_eq!(seqs, (1..=expected.len() as u64).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn prompts_render_any_description(desc in "\\PC{0,80}", kind_idx in 0usize..5) {
        let kind = [TaskKind::Plan, TaskKind::DataStructures, TaskKind::LogicReview, TaskKind::Implement, TaskKind::Monolith][kind_idx];
        let mut view = BTreeMap::new();
        view.insert(format!("{PLAN_TASK_ID}/plan"), "{plan} {{x}}".to_string());
        let prompt = render_prompt(kind.role(), &task_for(kind, &desc), &view).unwrap();
        prop_assert!(prompt.contains(&desc));
    }

    #[test]
    fn mock_output_is_seeded(desc in "[A-Za-z ]{1,40}", seed in any::<u64>(), role_idx in 0usize..5) {
        let role = [AgentRole::Prefrontal, AgentRole::Parietal, AgentRole::Temporal, AgentRole::Motor, AgentRole::Monolith][role_idx];
        let task = task_for(TaskKind::Implement, &desc);
        prop_assert_eq!(mock_generate(role, &task, seed), mock_generate(role, &task, seed));
        prop_assert_ne!(mock_generate(role, &task, seed), mock_generate(role, &task, seed.wrapping_add(1)));
    }

    #[test]
    fn mock_plans_always_parse(desc in "\\PC{1,60}", seed in any::<u64>()) {
        let plan = mock_generate(AgentRole::Prefrontal, &task_for(TaskKind::Plan, &desc), seed);
        let subtasks = parse_plan(&plan).unwrap();
        prop_assert_eq!(subtasks.len(), 4);
    }

    #[test]
    fn run_json_round_trips(
        ids in prop::collection::btree_set("[a-z]{1,6}", 1..5),
        content in "\\PC{0,40}",
        passed in any::<bool>(),
        seed in any::<u64>(),
        started in 0u64..1_000_000,
        elapsed in prop::option::of(0u64..1_000_000),
    ) {
        let graph = TaskGraph::from_tasks(ids.iter().map(|id| Task::new(id.clone(), TaskKind::Implement, "x").unwrap())).unwrap();
        let artifacts: Vec<Artifact> = ids.iter().map(|id| Artifact {
            artifact_id: format!("{id}#1"),
            task_id: id.clone(),
            role: AgentRole::Motor,
            content: content.clone(),
            content_kind: ContentKind::Code,
            created_at: started,
        }).collect();
        let reports = artifacts.iter().map(|a| ValidationReport {
            artifact_id: a.artifact_id.clone(),
            task_id: a.task_id.clone(),
            results: vec![CheckResult { check_name: "c".into(), passed, detail: content.clone() }],
        }).collect();
        let run = PipelineRun {
            run_id: "r".into(),
            spec: TaskSpec {
                spec_id: "s".into(),
                title: "T".into(),
                description: content.clone(),
                target_language_tag: String::new(),
                checks: vec![],
                mode: Mode::Modular,
            },
            graph,
            artifacts,
            reports,
            started_at_ms: started,
            finished_at_ms: elapsed.map(|e| started + e),
            status: if passed { RunStatus::Succeeded } else { RunStatus::Failed },
            seed,
        };
        let back = PipelineRun::from_json(&run.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, run);
    }
}

/// Every interleaving of two senders with two messages each preserves
/// per-sender order at a single recipient.
#[test]
fn two_by_two_interleavings() {
    let mut seen = BTreeSet::new();
    for mask in 0u8..16 {
        if mask.count_ones() != 2 {
            continue;
        }
        let bus = MessageBus::new();
        for id in ["a", "b", "r"] {
            bus.register(id);
        }
        let (mut na, mut nb) = (0, 0);
        for bit in 0..4 {
            let (sender, n) = if mask & (1 << bit) != 0 { ("a", &mut na) } else { ("b", &mut nb) };
            *n += 1;
            bus.send(Envelope::new(sender, "r", MessageKind::Result, "t", format!("{sender}{n}"))).unwrap();
        }
        let order: Vec<String> = std::iter::from_fn(|| bus.receive("r", Duration::ZERO).unwrap())
            .map(|m| m.payload)
            .collect();
        let pos = |p: &str| order.iter().position(|x| x == p).unwrap();
        assert!(pos("a1") < pos("a2") && pos("b1") < pos("b2"));
        seen.insert(order);
    }
    assert_eq!(seen.len(), 6);
}

#[test]
fn loss_analytic_values() {
    let input = |p: Vec<Vec<f64>>, y: Vec<Vec<f64>>, lambda: f64, theta: f64| LossInput {
        probs: p,
        labels: y,
        lambda,
        theta_sq_norm: theta,
    };
    let perfect = input(vec![vec![1.0, 0.0 + f64::MIN_POSITIVE]], vec![vec![1.0, 0.0]], 0.0, 0.0);
    assert!(regularized_cross_entropy(&perfect).unwrap().abs() < 1e-9);
    let half = input(vec![vec![0.5, 0.5]], vec![vec![1.0, 0.0]], 0.0, 0.0);
    assert!((regularized_cross_entropy(&half).unwrap() - 0.5f64.ln().abs()).abs() < 1e-9);
    assert!((regularized_cross_entropy(&half).unwrap() - std::f64::consts::LN_2).abs() < 1e-6);
    let reg = input(vec![vec![0.5, 0.5]], vec![vec![1.0, 0.0]], 0.1, 2.0);
    assert!((regularized_cross_entropy(&reg).unwrap() - (0.5f64.ln().abs() + 0.2)).abs() < 1e-9);
}
