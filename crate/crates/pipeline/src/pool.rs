//! Append-only record of stage outputs shared by the stages of one run.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub agent: String,
    /// Logical insertion sequence number, starting at 1.
    pub timestamp: u64,
    pub content: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryPool {
    entries: Vec<PoolEntry>,
}

impl MemoryPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, agent: impl Into<String>, content: impl Into<String>) -> &PoolEntry {
        let timestamp = self.entries.len() as u64 + 1;
        self.entries.push(PoolEntry {
            agent: agent.into(),
            timestamp,
            content: content.into(),
        });
        self.entries.last().expect("just pushed")
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Most recent output of `agent`.
    pub fn latest(&self, agent: &str) -> Option<&PoolEntry> {
        self.entries.iter().rev().find(|e| e.agent == agent)
    }
}
