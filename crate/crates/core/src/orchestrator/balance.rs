use crate::model::{AgentProfile, Task};

use super::OrchestratorError;

/// Picks the least-loaded agent of the task's role with spare capacity:
/// minimum `(in_flight, ema_latency_ms, agent_id)`. `Ok(None)` means every
/// matching agent is busy and the task should wait.
pub fn assign<'a>(task: &Task, pool: &'a [AgentProfile]) -> Result<Option<&'a str>, OrchestratorError> {
    let mut matching = pool.iter().filter(|a| a.role == task.role).peekable();
    if matching.peek().is_none() {
        return Err(OrchestratorError::NoAgentForRole(task.role));
    }
    Ok(matching
        .filter(|a| a.has_capacity())
        .min_by(|a, b| {
            a.in_flight
                .cmp(&b.in_flight)
                .then(a.ema_latency_ms.total_cmp(&b.ema_latency_ms))
                .then(a.agent_id.cmp(&b.agent_id))
        })
        .map(|a| a.agent_id.as_str()))
}

/// Folds one observation into the agent's latency EMA and success counters.
/// The first observation initializes the EMA directly.
pub fn update_analytics(profile: &AgentProfile, latency_ms: f64, succeeded: bool, alpha: f64) -> AgentProfile {
    let latency_ms = latency_ms.max(0.0);
    let mut next = profile.clone();
    next.ema_latency_ms = if profile.completed == 0 {
        latency_ms
    } else {
        alpha * latency_ms + (1.0 - alpha) * profile.ema_latency_ms
    };
    next.completed += 1;
    if succeeded {
        next.successes += 1;
    }
    next.success_rate = next.successes as f64 / next.completed.max(1) as f64;
    next
}
