use std::collections::BTreeMap;
use std::path::Path;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use super::{CommsError, DEFAULT_PAYLOAD_LIMIT};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlackboardEntry {
    pub key: String,
    pub value: String,
    pub version: u64,
    pub writer: String,
}

/// Versioned shared workspace. Writes are last-writer-wins and bump the
/// key's version by one; reads and snapshots see only committed entries.
///
/// Keys are conventionally namespaced as `<task_id>/<name>`.
pub struct Blackboard {
    entries: RwLock<BTreeMap<String, BlackboardEntry>>,
    payload_limit: usize,
}

impl Default for Blackboard {
    fn default() -> Self {
        Blackboard::new()
    }
}

impl Blackboard {
    pub fn new() -> Blackboard {
        Blackboard::with_payload_limit(DEFAULT_PAYLOAD_LIMIT)
    }

    pub fn with_payload_limit(payload_limit: usize) -> Blackboard {
        Blackboard {
            entries: RwLock::new(BTreeMap::new()),
            payload_limit,
        }
    }

    /// Stores `value` under `key` and returns the new version.
    pub fn write(&self, key: &str, value: &str, writer: &str) -> Result<u64, CommsError> {
        if value.len() > self.payload_limit {
            return Err(CommsError::PayloadTooLarge {
                size: value.len(),
                limit: self.payload_limit,
            });
        }
        let mut entries = self.entries.write().unwrap();
        let version = entries.get(key).map_or(1, |e| e.version + 1);
        entries.insert(
            key.to_string(),
            BlackboardEntry {
                key: key.to_string(),
                value: value.to_string(),
                version,
                writer: writer.to_string(),
            },
        );
        Ok(version)
    }

    pub fn read(&self, key: &str) -> Option<BlackboardEntry> {
        self.entries.read().unwrap().get(key).cloned()
    }

    /// Point-in-time copy of every entry.
    pub fn snapshot(&self) -> BTreeMap<String, BlackboardEntry> {
        self.entries.read().unwrap().clone()
    }

    /// Values for the given keys, skipping absent ones.
    pub fn view<'a, I>(&self, keys: I) -> BTreeMap<String, String>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let entries = self.entries.read().unwrap();
        keys.into_iter()
            .filter_map(|k| entries.get(k).map(|e| (k.to_string(), e.value.clone())))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Debug dump of the current contents as pretty JSON.
    pub fn dump_json(&self, path: &Path) -> Result<(), CommsError> {
        let snapshot = self.snapshot();
        let text = serde_json::to_string_pretty(&snapshot)
            .map_err(|e| CommsError::Dump(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| CommsError::Dump(e.to_string()))
    }
}
