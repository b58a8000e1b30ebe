use std::io::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Dispatched,
    Completed,
    Failed,
    Retried,
    Stalled,
}

/// One line of the run-event log. `ts_ms` is measured from run start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEvent {
    pub ts_ms: f64,
    pub event: EventKind,
    pub task_id: String,
    pub agent_id: String,
    pub detail: String,
}

pub trait EventSink {
    fn emit(&mut self, event: RunEvent);
}

impl EventSink for Vec<RunEvent> {
    fn emit(&mut self, event: RunEvent) {
        self.push(event);
    }
}

/// Discards every event.
pub struct NullSink;

impl EventSink for NullSink {
    fn emit(&mut self, _event: RunEvent) {}
}

/// Writes one JSON object per line.
pub struct JsonLinesSink<W: Write> {
    out: W,
}

impl<W: Write> JsonLinesSink<W> {
    pub fn new(out: W) -> Self {
        JsonLinesSink { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> EventSink for JsonLinesSink<W> {
    fn emit(&mut self, event: RunEvent) {
        if let Ok(line) = serde_json::to_string(&event) {
            // Logging must not abort a run.
            let _ = writeln!(self.out, "{line}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_lines_shape() {
        let mut sink = JsonLinesSink::new(Vec::new());
        sink.emit(RunEvent {
            ts_ms: 1.5,
            event: EventKind::Dispatched,
            task_id: "m1".into(),
            agent_id: "motor-1".into(),
            detail: "attempt 1".into(),
        });
        let text = String::from_utf8(sink.into_inner()).unwrap();
        let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(v["event"], "dispatched");
        assert_eq!(v["task_id"], "m1");
        assert_eq!(v["agent_id"], "motor-1");
        assert_eq!(v["ts_ms"], 1.5);
        assert!(v.get("detail").is_some());
    }
}
