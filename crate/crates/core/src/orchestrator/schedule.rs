use std::collections::BTreeMap;

use crate::model::{ModelError, TaskGraph, TaskStatus};

/// Critical-path priority with unit task cost: the number of nodes on the
/// longest chain from each task down to a sink. Higher runs first.
pub fn compute_priorities(graph: &TaskGraph) -> Result<BTreeMap<String, u32>, ModelError> {
    let order = graph.topo_order()?;
    let dependents = graph.dependents();
    let mut prio: BTreeMap<String, u32> = BTreeMap::new();
    for id in order.iter().rev() {
        let below = dependents[id]
            .iter()
            .map(|d| prio[*d])
            .max()
            .unwrap_or(0);
        prio.insert(id.to_string(), below + 1);
    }
    Ok(prio)
}

/// Writes computed priorities back onto the graph's tasks.
pub fn apply_priorities(graph: &mut TaskGraph) -> Result<(), ModelError> {
    let prio = compute_priorities(graph)?;
    for task in graph.nodes.values_mut() {
        task.priority = prio[&task.task_id];
    }
    Ok(())
}

/// Tasks not yet started whose dependencies are all done, in insertion order.
pub fn ready_set(graph: &TaskGraph) -> Vec<String> {
    graph
        .tasks()
        .filter(|t| matches!(t.status, TaskStatus::Pending | TaskStatus::Ready))
        .filter(|t| {
            t.deps
                .iter()
                .all(|d| graph.get(d).is_some_and(|dep| dep.status == TaskStatus::Done))
        })
        .map(|t| t.task_id.clone())
        .collect()
}
