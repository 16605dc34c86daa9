//! Language-model solver: prompt rendering, answer parsing, the chat client
//! and a scripted stand-in for reproducible runs.

pub mod chat;
mod cognitive;
pub mod parse;
pub mod prompts;
mod scripted;
mod trace;

use serde::{Deserialize, Serialize};

pub use chat::{
    ChatClient, ChatError, ChatMessage, ChatReply, ChatRequest, ChatTransport, EndpointConfig,
    HttpTransport, RateLimiter, RetryConfig, Role, Secret, TokenUsage,
};
pub use cognitive::{AgentConfig, AgentMode, CognitiveAgent};
pub use parse::{parse_recommendations, parse_stop_answer, Recommendation, RecommendationError, StopVerdict};
pub use prompts::PromptBundle;
pub use scripted::{PlaybookEntry, ScriptedTransport};
pub use trace::{ReasoningRecord, TraceSink};

/// Which prompt a model call answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Analysis,
    StopJudgement,
    Planning,
    BaselineSearch,
    BaselineStop,
    /// Turning a research summary into a study config.
    ConfigDraft,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error("prompt needs about {estimated} tokens but the context holds {limit}")]
    ContextBudgetExceeded { estimated: usize, limit: usize },
    #[error("scripted agent: {0}")]
    Playbook(String),
}
