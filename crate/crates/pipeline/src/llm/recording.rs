use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use super::{CallKey, ChatClient, ChatRequest, ChatResponse, FixtureEntry, FixtureStore, LlmError};

/// Passes calls through to an inner client and persists every response as a
/// replay fixture. The problem's fixture file is rewritten atomically after
/// each call, so an interrupted run leaves only complete files.
pub struct RecordingClient {
    inner: Arc<dyn ChatClient>,
    dir: PathBuf,
    store: Mutex<FixtureStore>,
}

impl RecordingClient {
    pub fn new(inner: Arc<dyn ChatClient>, dir: impl Into<PathBuf>) -> Result<Self, LlmError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| LlmError::StorageWrite(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            inner,
            dir,
            store: Mutex::new(FixtureStore::new()),
        })
    }

    pub fn recorded(&self) -> FixtureStore {
        self.store.lock().expect("recording lock").clone()
    }
}

impl ChatClient for RecordingClient {
    fn complete(&self, key: &CallKey, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let response = self.inner.complete(key, request)?;
        let mut store = self.store.lock().expect("recording lock");
        let entry = FixtureEntry {
            content: response.content.clone(),
            usage: response.usage,
        };
        if store.insert(key, entry).is_some() {
            log::warn!("overwriting recorded fixture {key}");
        }
        store.save_problem(&self.dir, &key.problem)?;
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{Message, ReplayClient, ScriptedClient, DEFAULT_MODEL};

    fn request() -> ChatRequest {
        ChatRequest {
            model: DEFAULT_MODEL.into(),
            temperature: 0.0,
            messages: vec![Message::user("x")],
        }
    }

    #[test]
    fn two_calls_give_two_entries_and_replay_matches() {
        let dir = tempfile::tempdir().unwrap();
        let rec = RecordingClient::new(Arc::new(ScriptedClient::new(["one", "two"])), dir.path()).unwrap();
        let k0 = CallKey::new("SemanticEncoder", "p", 0);
        let k1 = CallKey::new("Formalization", "p", 0);
        let a = rec.complete(&k0, &request()).unwrap().content;
        let b = rec.complete(&k1, &request()).unwrap().content;
        let store = FixtureStore::load_dir(dir.path()).unwrap();
        assert_eq!(store.len(), 2);
        let replay = ReplayClient::new(store);
        assert_eq!(replay.complete(&k0, &request()).unwrap().content, a);
        assert_eq!(replay.complete(&k1, &request()).unwrap().content, b);
    }

    #[test]
    fn same_key_is_overwritten() {
        let dir = tempfile::tempdir().unwrap();
        let rec = RecordingClient::new(Arc::new(ScriptedClient::new(["one", "two"])), dir.path()).unwrap();
        let k = CallKey::new("SemanticEncoder", "p", 0);
        rec.complete(&k, &request()).unwrap();
        rec.complete(&k, &request()).unwrap();
        let store = FixtureStore::load_dir(dir.path()).unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(store.get(&k).unwrap().content, "two");
    }

    #[test]
    fn failed_calls_record_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let rec = RecordingClient::new(Arc::new(ScriptedClient::new(Vec::<String>::new())), dir.path()).unwrap();
        assert!(rec.complete(&CallKey::new("S", "p", 0), &request()).is_err());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
