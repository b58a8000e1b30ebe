use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use cortexc_core::agents::{BackendConfig, BackendKind, DEFAULT_MOCK_LATENCY_MS, DEFAULT_TIMEOUT_MS};
use cortexc_core::model::{AgentProfile, AgentRole, Mode, DEFAULT_MAX_ATTEMPTS};
use cortexc_core::orchestrator::OrchestratorConfig;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendFlag {
    Mock,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeFlag {
    Modular,
    Monolithic,
}

impl From<ModeFlag> for Mode {
    fn from(m: ModeFlag) -> Mode {
        match m {
            ModeFlag::Modular => Mode::Modular,
            ModeFlag::Monolithic => Mode::Monolithic,
        }
    }
}

/// Flags shared by every command. Each overrides the config-file key of the
/// same name (dashes become underscores).
#[derive(Debug, Clone, Default, Args)]
pub struct CommonFlags {
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendFlag>,
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,
    #[arg(long, value_name = "NAME")]
    pub model: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub concurrency: Option<usize>,
    #[arg(long)]
    pub max_attempts: Option<u32>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "ID")]
    pub run_id: Option<String>,
    #[arg(long, value_name = "PATH")]
    pub survey: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeFlag>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    pub agent_id: String,
    pub role: AgentRole,
    #[serde(default = "one")]
    pub capacity: u32,
}

fn one() -> u32 {
    1
}

/// Contents of the TOML config file; every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub backend: Option<BackendFlag>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub seed: Option<u64>,
    pub concurrency: Option<usize>,
    pub max_attempts: Option<u32>,
    pub out: Option<PathBuf>,
    pub run_id: Option<String>,
    pub survey: Option<PathBuf>,
    pub mode: Option<ModeFlag>,
    pub timeout_ms: Option<u64>,
    pub mock_latency_ms: Option<u64>,
    pub ema_alpha: Option<f64>,
    #[serde(default)]
    pub failure_plan: BTreeMap<String, u32>,
    #[serde(default)]
    pub agents: Vec<AgentEntry>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }
}

/// Config file merged with flags.
#[derive(Debug, Clone)]
pub struct CliConfig {
    pub backend: BackendConfig,
    pub concurrency: usize,
    pub max_attempts: u32,
    pub ema_alpha: f64,
    pub out: PathBuf,
    pub run_id: Option<String>,
    pub survey: Option<PathBuf>,
    pub mode: Option<Mode>,
    pub agents: Vec<AgentEntry>,
}

impl CliConfig {
    pub fn resolve(flags: &CommonFlags) -> Result<CliConfig, CliError> {
        let file = match &flags.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let seed = flags.seed.or(file.seed).unwrap_or(0);
        let kind = match flags.backend.or(file.backend).unwrap_or(BackendFlag::Mock) {
            BackendFlag::Mock => BackendKind::Mock,
            BackendFlag::Http => BackendKind::Http,
        };
        let backend = BackendConfig {
            kind,
            endpoint_url: flags.endpoint.clone().or(file.endpoint).unwrap_or_default(),
            model_name: flags.model.clone().or(file.model).unwrap_or_default(),
            timeout_ms: file.timeout_ms.unwrap_or(DEFAULT_TIMEOUT_MS),
            seed,
            failure_plan: file.failure_plan,
            mock_latency_ms: file.mock_latency_ms.unwrap_or(DEFAULT_MOCK_LATENCY_MS),
        };
        backend.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let config = CliConfig {
            backend,
            concurrency: flags.concurrency.or(file.concurrency).unwrap_or(4),
            max_attempts: flags.max_attempts.or(file.max_attempts).unwrap_or(DEFAULT_MAX_ATTEMPTS),
            ema_alpha: file.ema_alpha.unwrap_or(0.2),
            out: flags.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from(".")),
            run_id: flags.run_id.clone().or(file.run_id),
            survey: flags.survey.clone().or(file.survey),
            mode: flags.mode.or(file.mode).map(Mode::from),
            agents: file.agents,
        };
        config.orchestrator(Mode::Modular).validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(config)
    }

    /// Orchestrator settings for a run in `mode`. Without an explicit agent
    /// list each required role gets one agent.
    pub fn orchestrator(&self, mode: Mode) -> OrchestratorConfig {
        let mut config = OrchestratorConfig::with_default_pool(mode);
        if !self.agents.is_empty() {
            config.agent_pool = self
                .agents
                .iter()
                .map(|a| AgentProfile::new(a.agent_id.clone(), a.role, a.capacity))
                .collect();
        }
        config.concurrency_limit = self.concurrency;
        config.max_attempts = self.max_attempts;
        config.ema_alpha = self.ema_alpha;
        config
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.out.join("runs")
    }

    pub fn outputs_dir(&self) -> PathBuf {
        self.out.join("out")
    }
}
