use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Pipeline shape: role-specialized agents or a single monolithic agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Modular,
    Monolithic,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Modular => "modular",
            Mode::Monolithic => "monolithic",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "modular" => Ok(Mode::Modular),
            "monolithic" => Ok(Mode::Monolithic),
            other => Err(ModelError::UnknownMode(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentKind {
    Plan,
    Schema,
    Review,
    Code,
    IntegratedCode,
}

impl ContentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ContentKind::Plan => "plan",
            ContentKind::Schema => "schema",
            ContentKind::Review => "review",
            ContentKind::Code => "code",
            ContentKind::IntegratedCode => "integrated_code",
        }
    }
}

impl fmt::Display for ContentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMethod {
    /// Passes iff the artifact content contains `argument`.
    ContainsText,
    /// Runs `argument` through the shell with the artifact on stdin.
    ExternalCommand,
    /// Looks `argument` up in a caller-provided script table.
    Scripted,
}

fn default_applies_to() -> Vec<ContentKind> {
    vec![ContentKind::IntegratedCode]
}

/// A named acceptance check. `applies_to` lists the artifact kinds it is run
/// against; by default only the final integrated artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckSpec {
    pub name: String,
    pub method: CheckMethod,
    pub argument: String,
    #[serde(default = "default_applies_to")]
    pub applies_to: Vec<ContentKind>,
}

impl CheckSpec {
    pub fn new(name: impl Into<String>, method: CheckMethod, argument: impl Into<String>) -> Self {
        CheckSpec {
            name: name.into(),
            method,
            argument: argument.into(),
            applies_to: default_applies_to(),
        }
    }

    pub fn contains_text(name: impl Into<String>, needle: impl Into<String>) -> Self {
        CheckSpec::new(name, CheckMethod::ContainsText, needle)
    }

    pub fn applying_to(mut self, kinds: impl IntoIterator<Item = ContentKind>) -> Self {
        self.applies_to = kinds.into_iter().collect();
        self
    }

    pub fn applies(&self, kind: ContentKind) -> bool {
        self.applies_to.contains(&kind)
    }
}

/// A user programming objective plus its acceptance checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub spec_id: String,
    pub title: String,
    pub description: String,
    #[serde(default)]
    pub target_language_tag: String,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default = "default_mode")]
    pub mode: Mode,
}

fn default_mode() -> Mode {
    Mode::Modular
}

impl TaskSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.spec_id.trim().is_empty() {
            return Err(ModelError::EmptyId("spec_id"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<TaskSpec, ModelError> {
        let spec: TaskSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}
