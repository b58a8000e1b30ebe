use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::model::{AgentRole, Task};

use super::mock::mock_generate;

/// Environment variable holding the bearer token for the HTTP backend.
pub const API_KEY_ENV: &str = "CORTEXC_API_KEY";
pub const DEFAULT_TIMEOUT_MS: u64 = 60_000;
pub const DEFAULT_MOCK_LATENCY_MS: u64 = 100;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("no response within {0} ms")]
    Timeout(u64),
    #[error("HTTP status {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("invalid backend config: {0}")]
    Config(String),
}

/// What a single model call produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentOutput {
    pub raw_text: String,
    pub latency_ms: f64,
    pub ok: bool,
    pub error_detail: Option<String>,
}

impl AgentOutput {
    pub fn success(raw_text: String, latency_ms: f64) -> AgentOutput {
        AgentOutput {
            raw_text,
            latency_ms,
            ok: true,
            error_detail: None,
        }
    }

    pub fn failure(detail: impl Into<String>, latency_ms: f64) -> AgentOutput {
        AgentOutput {
            raw_text: String::new(),
            latency_ms,
            ok: false,
            error_detail: Some(detail.into()),
        }
    }
}

/// One generation request. Only `prompt` goes over the wire; `role` and
/// `task` let local backends key their behaviour.
#[derive(Debug, Clone, Copy)]
pub struct AgentRequest<'a> {
    pub role: AgentRole,
    pub task: &'a Task,
    pub prompt: &'a str,
}

pub trait Backend: Send + Sync {
    fn invoke(&self, request: &AgentRequest<'_>) -> Result<AgentOutput, BackendError>;
}

/// Calls `backend`, rejecting empty prompts up front.
pub fn invoke(backend: &dyn Backend, request: &AgentRequest<'_>) -> Result<AgentOutput, BackendError> {
    if request.prompt.trim().is_empty() {
        return Err(BackendError::EmptyPrompt);
    }
    backend.invoke(request)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint_url: String,
    #[serde(default)]
    pub model_name: String,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub seed: u64,
    /// Task id (or task kind) -> number of leading invocations that fail.
    #[serde(default)]
    pub failure_plan: BTreeMap<String, u32>,
    #[serde(default = "default_latency")]
    pub mock_latency_ms: u64,
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_MS
}

fn default_latency() -> u64 {
    DEFAULT_MOCK_LATENCY_MS
}

impl BackendConfig {
    pub fn mock(seed: u64) -> BackendConfig {
        BackendConfig {
            kind: BackendKind::Mock,
            endpoint_url: String::new(),
            model_name: "mock".into(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
            seed,
            failure_plan: BTreeMap::new(),
            mock_latency_ms: DEFAULT_MOCK_LATENCY_MS,
        }
    }

    pub fn http(endpoint_url: impl Into<String>, model_name: impl Into<String>) -> BackendConfig {
        BackendConfig {
            kind: BackendKind::Http,
            endpoint_url: endpoint_url.into(),
            model_name: model_name.into(),
            ..BackendConfig::mock(0)
        }
    }

    pub fn with_latency_ms(mut self, ms: u64) -> BackendConfig {
        self.mock_latency_ms = ms;
        self
    }

    pub fn with_failures(mut self, key: impl Into<String>, count: u32) -> BackendConfig {
        self.failure_plan.insert(key.into(), count);
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.timeout_ms == 0 {
            return Err(BackendError::Config("timeout_ms must be positive".into()));
        }
        if self.kind == BackendKind::Http && self.endpoint_url.trim().is_empty() {
            return Err(BackendError::Config("http backend needs endpoint_url".into()));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Arc<dyn Backend>, BackendError> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::Mock => Arc::new(MockBackend::new(self)),
            BackendKind::Http => Arc::new(HttpBackend::new(self)),
        })
    }
}

/// Deterministic local backend with simulated latency and scripted failures.
pub struct MockBackend {
    seed: u64,
    latency: Duration,
    timeout: Duration,
    failure_plan: BTreeMap<String, u32>,
    calls: Mutex<HashMap<String, u32>>,
}

impl MockBackend {
    pub fn new(config: &BackendConfig) -> MockBackend {
        MockBackend {
            seed: config.seed,
            latency: Duration::from_millis(config.mock_latency_ms),
            timeout: Duration::from_millis(config.timeout_ms),
            failure_plan: config.failure_plan.clone(),
            calls: Mutex::new(HashMap::new()),
        }
    }

    fn planned_failures(&self, task: &Task) -> u32 {
        self.failure_plan
            .get(&task.task_id)
            .or_else(|| self.failure_plan.get(task.kind.as_str()))
            .copied()
            .unwrap_or(0)
    }
}

impl Backend for MockBackend {
    fn invoke(&self, request: &AgentRequest<'_>) -> Result<AgentOutput, BackendError> {
        if request.prompt.trim().is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        let start = Instant::now();
        let call = {
            let mut calls = self.calls.lock().unwrap();
            let n = calls.entry(request.task.task_id.clone()).or_insert(0);
            *n += 1;
            *n
        };
        if self.latency > self.timeout {
            std::thread::sleep(self.timeout);
            return Err(BackendError::Timeout(self.timeout.as_millis() as u64));
        }
        std::thread::sleep(self.latency);
        let latency_ms = start.elapsed().as_secs_f64() * 1e3;
        let failures = self.planned_failures(request.task);
        if call <= failures {
            return Ok(AgentOutput::failure(
                format!("scripted failure {call} of {failures} for {}", request.task.task_id),
                latency_ms,
            ));
        }
        Ok(AgentOutput::success(
            mock_generate(request.role, request.task, self.seed),
            latency_ms,
        ))
    }
}

/// Minimal chat-completion client: one POST per call, temperature 0.
pub struct HttpBackend {
    endpoint: String,
    model: String,
    timeout_ms: u64,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: &BackendConfig) -> HttpBackend {
        let agent_config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build();
        HttpBackend {
            endpoint: config.endpoint_url.clone(),
            model: config.model_name.clone(),
            timeout_ms: config.timeout_ms,
            agent: ureq::Agent::new_with_config(agent_config),
        }
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.model,
            "messages": [{ "role": "user", "content": prompt }],
            "temperature": 0,
        })
    }

    fn post(&self, body: &Value) -> Result<(u16, String), ureq::Error> {
        let mut req = self.agent.post(&self.endpoint);
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            if !key.is_empty() {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
        }
        let resp = req
            .header("Content-Type", "application/json")
            .send(body.to_string())?;
        let status = resp.status().as_u16();
        let text = resp.into_body().read_to_string()?;
        Ok((status, text))
    }
}

/// Pulls `choices[0].message.content` out of a chat-completion response.
pub fn extract_content(body: &str) -> Result<String, BackendError> {
    let value: Value =
        serde_json::from_str(body).map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::MalformedResponse("no choices[0].message.content".into()))
}

impl Backend for HttpBackend {
    fn invoke(&self, request: &AgentRequest<'_>) -> Result<AgentOutput, BackendError> {
        if request.prompt.trim().is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        let body = self.request_body(request.prompt);
        let start = Instant::now();
        let mut retried = false;
        let (status, text) = loop {
            match self.post(&body) {
                Ok(r) => break r,
                Err(ureq::Error::Timeout(_)) => return Err(BackendError::Timeout(self.timeout_ms)),
                Err(e) if !retried => {
                    log_retry(&e);
                    retried = true;
                }
                Err(e) => return Err(BackendError::Transport(e.to_string())),
            }
        };
        let latency_ms = start.elapsed().as_secs_f64() * 1e3;
        if !(200..300).contains(&status) {
            return Err(BackendError::HttpStatus { status, body: text });
        }
        Ok(AgentOutput::success(extract_content(&text)?, latency_ms))
    }
}

fn log_retry(err: &ureq::Error) {
    eprintln!("http backend: transport error ({err}), retrying once");
}
