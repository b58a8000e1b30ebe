use std::collections::{BTreeSet, HashMap};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{Mode, ModelError, Task, TaskKind, TaskStatus};

/// Acyclic dependency graph of tasks. Edges are implied by each task's
/// `deps`; node order is insertion order and is used for tie-breaking.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskGraph {
    pub nodes: IndexMap<String, Task>,
}

impl TaskGraph {
    pub fn new() -> TaskGraph {
        TaskGraph::default()
    }

    pub fn from_tasks<I: IntoIterator<Item = Task>>(tasks: I) -> Result<TaskGraph, ModelError> {
        let mut graph = TaskGraph::new();
        for t in tasks {
            graph.insert(t)?;
        }
        Ok(graph)
    }

    pub fn insert(&mut self, task: Task) -> Result<(), ModelError> {
        if task.task_id.is_empty() {
            return Err(ModelError::EmptyId("task_id"));
        }
        if self.nodes.contains_key(&task.task_id) {
            return Err(ModelError::DuplicateTask(task.task_id));
        }
        self.nodes.insert(task.task_id.clone(), task);
        Ok(())
    }

    pub fn get(&self, task_id: &str) -> Option<&Task> {
        self.nodes.get(task_id)
    }

    /// Replaces an existing node with an updated value.
    pub fn replace(&mut self, task: Task) -> Result<(), ModelError> {
        match self.nodes.get_mut(&task.task_id) {
            Some(slot) => {
                *slot = task;
                Ok(())
            }
            None => Err(ModelError::UnknownTask(task.task_id)),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn tasks(&self) -> impl Iterator<Item = &Task> {
        self.nodes.values()
    }

    pub fn index_of(&self, task_id: &str) -> Option<usize> {
        self.nodes.get_index_of(task_id)
    }

    /// Reverse adjacency: task id -> tasks that depend on it.
    pub fn dependents(&self) -> HashMap<&str, Vec<&str>> {
        let mut out: HashMap<&str, Vec<&str>> =
            self.nodes.keys().map(|k| (k.as_str(), Vec::new())).collect();
        for task in self.nodes.values() {
            for dep in &task.deps {
                if let Some(list) = out.get_mut(dep.as_str()) {
                    list.push(task.task_id.as_str());
                }
            }
        }
        out
    }

    /// Every task reachable by following deps from `task_id`, excluding itself.
    pub fn ancestors(&self, task_id: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&str> = match self.nodes.get(task_id) {
            Some(t) => t.deps.iter().map(String::as_str).collect(),
            None => return seen,
        };
        while let Some(id) = stack.pop() {
            if !seen.insert(id.to_string()) {
                continue;
            }
            if let Some(t) = self.nodes.get(id) {
                stack.extend(t.deps.iter().map(String::as_str));
            }
        }
        seen
    }

    /// Topological order (deps first); ties broken by insertion order.
    pub fn topo_order(&self) -> Result<Vec<&str>, ModelError> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, task) in self.nodes.values().enumerate() {
            for dep in &task.deps {
                let j = self
                    .nodes
                    .get_index_of(dep)
                    .ok_or_else(|| ModelError::DanglingDependency {
                        task_id: task.task_id.clone(),
                        missing: dep.clone(),
                    })?;
                indegree[i] += 1;
                children[j].push(i);
            }
        }
        let mut frontier: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = frontier.pop_first() {
            order.push(i);
            for &c in &children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    frontier.insert(c);
                }
            }
        }
        if order.len() != n {
            return Err(ModelError::Cycle(self.find_cycle().unwrap_or_default()));
        }
        Ok(order
            .into_iter()
            .map(|i| self.nodes.get_index(i).unwrap().0.as_str())
            .collect())
    }

    /// Returns one dependency cycle, if any, as the ids along it.
    pub fn find_cycle(&self) -> Option<Vec<String>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Color {
            White,
            Gray,
            Black,
        }
        let n = self.nodes.len();
        let mut color = vec![Color::White; n];
        let adj: Vec<Vec<usize>> = self
            .nodes
            .values()
            .map(|t| {
                t.deps
                    .iter()
                    .filter_map(|d| self.nodes.get_index_of(d))
                    .collect()
            })
            .collect();

        for root in 0..n {
            if color[root] != Color::White {
                continue;
            }
            // (node, next child index)
            let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
            color[root] = Color::Gray;
            while let Some(&mut (node, ref mut next)) = stack.last_mut() {
                if *next < adj[node].len() {
                    let child = adj[node][*next];
                    *next += 1;
                    match color[child] {
                        Color::White => {
                            color[child] = Color::Gray;
                            stack.push((child, 0));
                        }
                        Color::Gray => {
                            let start = stack.iter().position(|&(v, _)| v == child).unwrap();
                            return Some(
                                stack[start..]
                                    .iter()
                                    .map(|&(v, _)| self.nodes.get_index(v).unwrap().0.clone())
                                    .collect(),
                            );
                        }
                        Color::Black => {}
                    }
                } else {
                    color[node] = Color::Black;
                    stack.pop();
                }
            }
        }
        None
    }

    pub fn is_finished(&self) -> bool {
        self.nodes.values().all(|t| t.status.is_terminal())
    }

    pub fn count_status(&self, status: TaskStatus) -> usize {
        self.nodes.values().filter(|t| t.status == status).count()
    }
}

/// Structural validation: ids consistent, role/kind mapping respected, every
/// dependency resolvable, and no cycles (self-loops included).
pub fn validate_graph(graph: &TaskGraph) -> Result<(), ModelError> {
    for (key, task) in &graph.nodes {
        if task.task_id.is_empty() {
            return Err(ModelError::EmptyId("task_id"));
        }
        if key != &task.task_id {
            return Err(ModelError::KeyMismatch {
                key: key.clone(),
                task_id: task.task_id.clone(),
            });
        }
        if task.role != task.kind.role() {
            return Err(ModelError::RoleMismatch {
                task_id: task.task_id.clone(),
                kind: task.kind,
                role: task.role,
            });
        }
    }
    for task in graph.nodes.values() {
        if let Some(missing) = task.deps.iter().find(|d| !graph.nodes.contains_key(*d)) {
            return Err(ModelError::DanglingDependency {
                task_id: task.task_id.clone(),
                missing: missing.clone(),
            });
        }
    }
    match graph.find_cycle() {
        Some(cycle) => Err(ModelError::Cycle(cycle)),
        None => Ok(()),
    }
}

/// Mode-specific shape: exactly one integrate node in modular mode, none in
/// monolithic mode.
pub fn validate_for_mode(graph: &TaskGraph, mode: Mode) -> Result<(), ModelError> {
    validate_graph(graph)?;
    let integrate = graph
        .tasks()
        .filter(|t| t.kind == TaskKind::Integrate)
        .count();
    let expected = match mode {
        Mode::Modular => 1,
        Mode::Monolithic => 0,
    };
    if integrate != expected {
        return Err(ModelError::IntegrateCount {
            mode,
            found: integrate,
        });
    }
    Ok(())
}
