//! Playbook-driven transport for reproducible runs without a model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::chat::{ChatError, ChatReply, ChatRequest, ChatTransport};
use super::Phase;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaybookEntry {
    pub expect_phase: Phase,
    pub response_text: String,
}

/// Replies with the playbook entries in order. A call whose phase differs
/// from the next entry's, or a call past the end, is an error.
#[derive(Debug, Clone)]
pub struct ScriptedTransport {
    entries: Vec<PlaybookEntry>,
    cursor: usize,
}

impl ScriptedTransport {
    pub fn new(entries: Vec<PlaybookEntry>) -> Self {
        Self { entries, cursor: 0 }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self::new(serde_json::from_str(text)?))
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// Skips entries already consumed by an earlier, interrupted run.
    pub fn advance(&mut self, n: usize) {
        self.cursor = (self.cursor + n).min(self.entries.len());
    }

    pub fn remaining(&self) -> usize {
        self.entries.len() - self.cursor
    }
}

impl ChatTransport for ScriptedTransport {
    fn send(&mut self, phase: Phase, _request: &ChatRequest) -> Result<ChatReply, ChatError> {
        let Some(entry) = self.entries.get(self.cursor) else {
            return Err(ChatError::Playbook(format!(
                "playbook exhausted after {} entries (asked for {phase:?})",
                self.entries.len()
            )));
        };
        if entry.expect_phase != phase {
            return Err(ChatError::Playbook(format!(
                "entry {} expects {:?} but the agent is in {phase:?}",
                self.cursor, entry.expect_phase
            )));
        }
        self.cursor += 1;
        Ok(ChatReply {
            text: entry.response_text.clone(),
            usage: None,
            attempts: 1,
        })
    }
}
