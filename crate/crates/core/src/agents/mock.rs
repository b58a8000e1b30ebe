use serde_json::json;
use sha2::{Digest, Sha256};

use crate::model::{AgentRole, Task};

/// Marker every mock implementation carries, followed by the task id.
pub const MOCK_IMPL_MARKER: &str = "MOCK-IMPL";

fn variant_tag(role: AgentRole, task: &Task, seed: u64) -> String {
    let digest = Sha256::digest(format!("{seed}:{role}:{}", task.task_id).as_bytes());
    hex::encode(&digest[..4])
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn ident(task_id: &str) -> String {
    let body: String = task_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    format!("task_{body}")
}

/// Deterministic stand-in for a model call. The output depends only on
/// `(role, task.task_id, task.description, seed)`.
pub fn mock_generate(role: AgentRole, task: &Task, seed: u64) -> String {
    let tag = variant_tag(role, task, seed);
    let subject = one_line(&task.description);
    match role {
        AgentRole::Prefrontal => {
            let plan = json!({
                "subtasks": [
                    {
                        "id": "d1",
                        "kind": "data_structures",
                        "description": format!("Organize the core data structures for {subject}"),
                        "depends_on": [],
                    },
                    {
                        "id": "l1",
                        "kind": "logic_review",
                        "description": format!("Review control flow and edge cases for {subject}"),
                        "depends_on": [],
                    },
                    {
                        "id": "m1",
                        "kind": "implement",
                        "description": format!("Implement the core rules of {subject}"),
                        "depends_on": ["d1", "l1"],
                    },
                    {
                        "id": "m2",
                        "kind": "implement",
                        "description": format!("Implement input handling and the main loop of {subject}"),
                        "depends_on": ["d1", "l1"],
                    },
                ]
            });
            format!(
                "High-level design for {prose} (variant {tag}).\n\
                 Components: state model, rules engine, input loop.\n\n\
                 ```json\n{}\n```\n",
                serde_json::to_string_pretty(&plan).expect("static plan serializes"),
                prose = subject.replace(['{', '}'], "")
            )
        }
        AgentRole::Parietal => format!(
            "Data structures for {subject} (variant {tag}):\n\
             - Board: 2D array of cells indexed [row][col] for O(1) updates\n\
             - Entities: vector of records keyed by stable integer ids\n\
             - Pending actions: ring buffer drained once per tick\n"
        ),
        AgentRole::Temporal => format!(
            "Logic review for {subject} (variant {tag}):\n\
             - Check boundary conditions before every move\n\
             - Resolve collisions before committing state\n\
             - Ignore invalid input instead of failing\n"
        ),
        AgentRole::Motor | AgentRole::Monolith => {
            let f = ident(&task.task_id);
            format!(
                "```\n\
                 // {MOCK_IMPL_MARKER} {id}\n\
                 // {subject} (variant {tag})\n\
                 fn {f}(state: &mut State) {{\n    state.step();\n}}\n\n\
                 #[test]\n\
                 fn {f}_advances_state() {{\n    let mut s = State::default();\n    {f}(&mut s);\n    assert_eq!(s.ticks, 1);\n}}\n\
                 ```\n",
                id = task.task_id
            )
        }
        AgentRole::Orchestrator => format!("Orchestrator performs integration locally (variant {tag}).\n"),
    }
}
