use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Usage;

/// One model call as kept in a run trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub stage: String,
    pub attempt: u32,
    pub prompt: String,
    pub response: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub usage: Option<Usage>,
    #[serde(default)]
    pub retries: u32,
}

impl CallRecord {
    /// Usage-reported units when present, else whitespace tokens of prompt and response.
    pub fn units(&self) -> u64 {
        match self.usage {
            Some(u) => u.prompt_units + u.completion_units,
            None => whitespace_units(&self.prompt) + whitespace_units(&self.response),
        }
    }
}

pub fn whitespace_units(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptUnits {
    pub per_stage: BTreeMap<String, u64>,
    pub total: u64,
}

pub fn count_transcript_units<'a>(calls: impl IntoIterator<Item = &'a CallRecord>) -> TranscriptUnits {
    let mut out = TranscriptUnits::default();
    for call in calls {
        let units = call.units();
        *out.per_stage.entry(call.stage.clone()).or_default() += units;
        out.total += units;
    }
    out
}
