use std::collections::HashSet;

use serde_json::{Map, Value};

use crate::model::TaskKind;

use super::AgentError;

/// Appended to the planning prompt when a plan could not be parsed.
pub const FORMAT_REMINDER: &str = "Your previous answer could not be parsed. Reply with exactly \
one JSON object containing the key \"subtasks\": a list of objects with the keys \"id\", \
\"kind\" (one of data_structures, logic_review, implement), \"description\" and \"depends_on\".";

/// One subtask proposed by the planner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedTask {
    pub id: String,
    pub kind: TaskKind,
    pub description: String,
    pub depends_on: Vec<String>,
}

/// Finds every top-level JSON object embedded in free text.
fn embedded_objects(text: &str) -> Vec<Map<String, Value>> {
    let mut found = Vec::new();
    let mut pos = 0;
    while let Some(off) = text[pos..].find('{') {
        let start = pos + off;
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(obj))) => {
                pos = start + stream.byte_offset();
                found.push(obj);
            }
            _ => pos = start + 1,
        }
    }
    found
}

fn str_field<'a>(obj: &'a Map<String, Value>, key: &str, idx: usize) -> Result<&'a str, AgentError> {
    obj.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| AgentError::MalformedPlan(format!("subtask {idx}: missing string \"{key}\"")))
}

/// Extracts the subtask list from planner output.
pub fn parse_plan(raw_text: &str) -> Result<Vec<PlannedTask>, AgentError> {
    let mut objects = embedded_objects(raw_text);
    let obj = match objects.len() {
        0 => return Err(AgentError::MalformedPlan("no JSON object found".into())),
        1 => objects.pop().unwrap(),
        n => return Err(AgentError::MalformedPlan(format!("expected one JSON object, found {n}"))),
    };
    let subtasks = obj
        .get("subtasks")
        .and_then(Value::as_array)
        .ok_or_else(|| AgentError::MalformedPlan("missing \"subtasks\" list".into()))?;

    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(subtasks.len());
    for (idx, entry) in subtasks.iter().enumerate() {
        let entry = entry
            .as_object()
            .ok_or_else(|| AgentError::MalformedPlan(format!("subtask {idx} is not an object")))?;
        let id = str_field(entry, "id", idx)?;
        if id.is_empty() {
            return Err(AgentError::MalformedPlan(format!("subtask {idx}: empty id")));
        }
        let kind_str = str_field(entry, "kind", idx)?;
        let kind = match TaskKind::parse(kind_str) {
            Some(k @ (TaskKind::DataStructures | TaskKind::LogicReview | TaskKind::Implement)) => k,
            _ => return Err(AgentError::UnknownKind(kind_str.to_string())),
        };
        let description = str_field(entry, "description", idx)?;
        let depends_on = entry
            .get("depends_on")
            .and_then(Value::as_array)
            .ok_or_else(|| AgentError::MalformedPlan(format!("subtask {idx}: missing \"depends_on\" list")))?
            .iter()
            .map(|d| {
                d.as_str().map(str::to_string).ok_or_else(|| {
                    AgentError::MalformedPlan(format!("subtask {idx}: non-string dependency"))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if !seen.insert(id.to_string()) {
            return Err(AgentError::DuplicateId(id.to_string()));
        }
        out.push(PlannedTask {
            id: id.to_string(),
            kind,
            description: description.to_string(),
            depends_on,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed_single_entry() {
        let raw = r#"{"subtasks":[{"id":"d1","kind":"data_structures","description":"grid","depends_on":[]}]}"#;
        let plan = parse_plan(raw).unwrap();
        assert_eq!(
            plan,
            vec![PlannedTask {
                id: "d1".into(),
                kind: TaskKind::DataStructures,
                description: "grid".into(),
                depends_on: vec![],
            }]
        );
    }

    #[test]
    fn no_json_is_malformed() {
        assert!(matches!(parse_plan("just prose"), Err(AgentError::MalformedPlan(_))));
        assert!(matches!(parse_plan("{not json"), Err(AgentError::MalformedPlan(_))));
    }

    #[test]
    fn duplicate_ids() {
        let raw = r#"{"subtasks":[
            {"id":"x","kind":"implement","description":"a","depends_on":[]},
            {"id":"x","kind":"implement","description":"b","depends_on":[]}]}"#;
        assert!(matches!(parse_plan(raw), Err(AgentError::DuplicateId(id)) if id == "x"));
    }

    #[test]
    fn unknown_and_reserved_kinds() {
        for kind in ["deploy", "plan", "integrate", "monolith"] {
            let raw = format!(
                r#"{{"subtasks":[{{"id":"a","kind":"{kind}","description":"","depends_on":[]}}]}}"#
            );
            assert!(matches!(parse_plan(&raw), Err(AgentError::UnknownKind(k)) if k == kind));
        }
    }

    #[test]
    fn prose_around_object_is_ignored() {
        let raw = "Here is the plan {draft}:\n```json\n{\"subtasks\": []}\n```\nDone.";
        assert!(parse_plan(raw).unwrap().is_empty());
    }

    #[test]
    fn missing_keys_and_multiple_objects() {
        assert!(matches!(parse_plan(r#"{"tasks": []}"#), Err(AgentError::MalformedPlan(_))));
        let raw = r#"{"subtasks":[{"id":"a","kind":"implement","description":"x"}]}"#;
        assert!(matches!(parse_plan(raw), Err(AgentError::MalformedPlan(_))));
        assert!(matches!(
            parse_plan(r#"{"subtasks": []} {"subtasks": []}"#),
            Err(AgentError::MalformedPlan(_))
        ));
    }
}
