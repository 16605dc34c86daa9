use serde::{Deserialize, Serialize};

use super::chat::TokenUsage;
use super::Phase;

/// One model call: what was asked, what came back, and what it was taken to mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningRecord {
    pub round: u32,
    pub phase: Phase,
    /// 0 for the first try, then 1, 2 for corrective re-prompts.
    pub attempt: u32,
    pub prompt: String,
    pub response: Option<String>,
    /// Parsed verdict or recommendations, when parsing succeeded.
    pub outcome: Option<serde_json::Value>,
    pub started_ms: u64,
    pub elapsed_ms: u64,
    pub usage: Option<TokenUsage>,
    pub error: Option<String>,
}

pub trait TraceSink {
    fn record(&mut self, record: ReasoningRecord);
}

impl TraceSink for Vec<ReasoningRecord> {
    fn record(&mut self, record: ReasoningRecord) {
        self.push(record);
    }
}
