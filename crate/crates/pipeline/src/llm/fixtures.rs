use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CallKey, ChatClient, ChatRequest, ChatResponse, LlmError, Usage};
use crate::fsutil::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub content: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub usage: Option<Usage>,
}

/// Recorded responses: problem id → (`<stage>/<attempt>` → entry).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixtureStore {
    problems: BTreeMap<String, BTreeMap<String, FixtureEntry>>,
}

impl FixtureStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every `<problem-id>.json` in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, LlmError> {
        let read = |e: std::io::Error| LlmError::StorageRead(format!("{}: {e}", dir.display()));
        let mut store = Self::new();
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(read)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| LlmError::StorageRead(format!("bad file name {}", path.display())))?
                .to_string();
            let text = fs::read_to_string(&path).map_err(|e| LlmError::StorageRead(format!("{}: {e}", path.display())))?;
            let entries: BTreeMap<String, FixtureEntry> = serde_json::from_str(&text)
                .map_err(|e| LlmError::StorageRead(format!("{}: {e}", path.display())))?;
            store.problems.insert(id, entries);
        }
        Ok(store)
    }

    pub fn get(&self, key: &CallKey) -> Option<&FixtureEntry> {
        self.problems.get(&key.problem)?.get(&key.fixture_key())
    }

    /// Inserts an entry, returning the one it replaced.
    pub fn insert(&mut self, key: &CallKey, entry: FixtureEntry) -> Option<FixtureEntry> {
        self.problems
            .entry(key.problem.clone())
            .or_default()
            .insert(key.fixture_key(), entry)
    }

    pub fn problem(&self, id: &str) -> Option<&BTreeMap<String, FixtureEntry>> {
        self.problems.get(id)
    }

    pub fn problem_ids(&self) -> impl Iterator<Item = &str> {
        self.problems.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.problems.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes `<dir>/<problem>.json` atomically.
    pub fn save_problem(&self, dir: &Path, problem: &str) -> Result<(), LlmError> {
        let entries = self.problems.get(problem).cloned().unwrap_or_default();
        let text = serde_json::to_string_pretty(&entries).map_err(|e| LlmError::StorageWrite(e.to_string()))?;
        write_atomic(&dir.join(format!("{problem}.json")), text.as_bytes())
            .map_err(|e| LlmError::StorageWrite(format!("{}: {e}", dir.display())))
    }
}

/// Answers every call from a [`FixtureStore`]; lookups are exact.
#[derive(Debug, Clone)]
pub struct ReplayClient {
    store: FixtureStore,
}

impl ReplayClient {
    pub fn new(store: FixtureStore) -> Self {
        Self { store }
    }

    pub fn from_dir(dir: &Path) -> Result<Self, LlmError> {
        FixtureStore::load_dir(dir).map(Self::new)
    }

    pub fn store(&self) -> &FixtureStore {
        &self.store
    }
}

impl ChatClient for ReplayClient {
    fn complete(&self, key: &CallKey, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let entry = self.store.get(key).ok_or_else(|| LlmError::FixtureMiss(key.to_string()))?;
        Ok(ChatResponse {
            usage: entry.usage,
            ..ChatResponse::text(entry.content.clone())
        })
    }
}
