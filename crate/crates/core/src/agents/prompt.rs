use std::collections::BTreeMap;

use crate::model::{AgentRole, Task};

use super::AgentError;

/// Id the orchestrator gives the root planning task; its output lives on
/// the blackboard at `plan/plan`.
pub const PLAN_TASK_ID: &str = "plan";

/// Placeholder names a template may reference.
pub const PLACEHOLDERS: [&str; 5] = ["description", "plan", "schema", "review", "failure_summary"];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Slot(&'static str),
}

/// A role prompt with `{name}` placeholders. `{{` and `}}` produce literal
/// braces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub role: AgentRole,
    pub template: String,
    segments: Vec<Segment>,
}

impl PromptTemplate {
    pub fn new(role: AgentRole, template: impl Into<String>) -> Result<PromptTemplate, AgentError> {
        let template = template.into();
        let segments = parse_template(&template)?;
        Ok(PromptTemplate {
            role,
            template,
            segments,
        })
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.segments.iter().filter_map(|s| match s {
            Segment::Slot(name) => Some(*name),
            Segment::Literal(_) => None,
        })
    }

    /// Single-pass substitution; substituted values are never re-expanded.
    fn fill(&self, values: &BTreeMap<&'static str, String>) -> String {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Literal(s) => out.push_str(s),
                Segment::Slot(name) => out.push_str(values.get(name).map_or("", String::as_str)),
            }
        }
        out
    }
}

fn parse_template(template: &str) -> Result<Vec<Segment>, AgentError> {
    let mut segments = Vec::new();
    let mut literal = String::new();
    let mut chars = template.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        match c {
            '{' if matches!(chars.peek(), Some((_, '{'))) => {
                chars.next();
                literal.push('{');
            }
            '}' if matches!(chars.peek(), Some((_, '}'))) => {
                chars.next();
                literal.push('}');
            }
            '{' => {
                let rest = &template[i + 1..];
                let end = rest
                    .find('}')
                    .ok_or_else(|| AgentError::Template(format!("unclosed placeholder at byte {i}")))?;
                let name = &rest[..end];
                let slot = PLACEHOLDERS
                    .iter()
                    .find(|p| **p == name)
                    .ok_or_else(|| AgentError::Template(format!("unknown placeholder {{{name}}}")))?;
                if !literal.is_empty() {
                    segments.push(Segment::Literal(std::mem::take(&mut literal)));
                }
                segments.push(Segment::Slot(slot));
                for _ in 0..=name.chars().count() {
                    chars.next();
                }
            }
            '}' => return Err(AgentError::Template(format!("stray '}}' at byte {i}"))),
            c => literal.push(c),
        }
    }
    if !literal.is_empty() {
        segments.push(Segment::Literal(literal));
    }
    Ok(segments)
}

const PREFRONTAL: &str = "Generate a high-level design for {description}. The design should \
include the necessary classes, methods, and interactions between components. Break the work \
into subtasks and answer with exactly one JSON object of the form \
{{\"subtasks\": [{{\"id\": \"...\", \"kind\": \"data_structures|logic_review|implement\", \
\"description\": \"...\", \"depends_on\": [\"...\"]}}]}}.{failure_summary}";

const PARIETAL: &str = "Organize the data structures for {description}. Represent the state \
so that it can be updated quickly and accessed efficiently by the rest of the program.\n\n\
Design:\n{plan}{failure_summary}";

const TEMPORAL: &str = "Ensure logical consistency in {description}. Handle edge cases such as \
boundary conditions and invalid interactions so that the program cannot crash.\n\n\
Design:\n{plan}\n\nData structures:\n{schema}{failure_summary}";

const MOTOR: &str = "Implement {description}. Follow the design, data structures and review \
below, and write unit tests to verify correctness.\n\n\
Design:\n{plan}\n\nData structures:\n{schema}\n\nReview:\n{review}{failure_summary}";

const MONOLITH: &str = "Write the complete program for {description}. Include every class, data \
structure and unit test it needs.{failure_summary}";

/// The prompt templates for every generating role.
#[derive(Debug, Clone)]
pub struct PromptBook {
    templates: BTreeMap<AgentRole, PromptTemplate>,
}

impl Default for PromptBook {
    fn default() -> Self {
        let mut templates = BTreeMap::new();
        for (role, text) in [
            (AgentRole::Prefrontal, PREFRONTAL),
            (AgentRole::Parietal, PARIETAL),
            (AgentRole::Temporal, TEMPORAL),
            (AgentRole::Motor, MOTOR),
            (AgentRole::Monolith, MONOLITH),
        ] {
            templates.insert(role, PromptTemplate::new(role, text).expect("built-in template"));
        }
        PromptBook { templates }
    }
}

impl PromptBook {
    pub fn set(&mut self, template: PromptTemplate) {
        self.templates.insert(template.role, template);
    }

    pub fn get(&self, role: AgentRole) -> Option<&PromptTemplate> {
        self.templates.get(&role)
    }

    /// Renders the prompt for `task` using the upstream entries in
    /// `board_view` (blackboard key -> value).
    pub fn render(
        &self,
        role: AgentRole,
        task: &Task,
        board_view: &BTreeMap<String, String>,
    ) -> Result<String, AgentError> {
        let template = self.get(role).ok_or(AgentError::NoTemplate(role))?;
        let required_plan = matches!(role, AgentRole::Parietal | AgentRole::Temporal);

        let mut values: BTreeMap<&'static str, String> = BTreeMap::new();
        values.insert("description", task.description.clone());
        for slot in ["plan", "schema", "review"] {
            let found = collect_suffix(board_view, slot);
            let value = match found {
                Some(v) => v,
                None if slot == "plan" && required_plan => {
                    return Err(AgentError::MissingContext(format!("{PLAN_TASK_ID}/plan")))
                }
                None => "(none)".to_string(),
            };
            values.insert(slot, value);
        }
        let feedback_key = format!("{}/failure_summary", task.task_id);
        let feedback = board_view
            .get(&feedback_key)
            .map(|f| format!("\n\nThe previous attempt was rejected:\n{f}"))
            .unwrap_or_default();
        values.insert("failure_summary", feedback);
        Ok(template.fill(&values))
    }
}

/// Joins every `*/<suffix>` entry in key order; `None` if there are none.
fn collect_suffix(board_view: &BTreeMap<String, String>, suffix: &str) -> Option<String> {
    let tail = format!("/{suffix}");
    let parts: Vec<&str> = board_view
        .iter()
        .filter(|(k, _)| k.ends_with(&tail))
        .map(|(_, v)| v.as_str())
        .collect();
    (!parts.is_empty()).then(|| parts.join("\n\n"))
}

/// Renders with the built-in templates.
pub fn render_prompt(
    role: AgentRole,
    task: &Task,
    board_view: &BTreeMap<String, String>,
) -> Result<String, AgentError> {
    PromptBook::default().render(role, task, board_view)
}
