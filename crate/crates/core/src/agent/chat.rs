//! Chat-completions client: wire types, an HTTP transport, retries with
//! exponential backoff, and a shared request-rate limiter.

use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::Phase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatReply {
    pub text: String,
    pub usage: Option<TokenUsage>,
    /// Transport attempts it took, retries included.
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChatError {
    #[error("request timed out after {0} ms")]
    Timeout(u64),
    #[error("endpoint answered with status {status}")]
    Endpoint { status: u16, body: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("reply was cut off at the token limit")]
    BudgetExceeded,
    #[error("malformed reply: {0}")]
    BadResponse(String),
    #[error("playbook: {0}")]
    Playbook(String),
}

impl ChatError {
    /// Worth another try: throttling, server errors, dropped connections.
    pub fn is_transient(&self) -> bool {
        match self {
            ChatError::Endpoint { status, .. } => *status == 429 || *status >= 500,
            ChatError::Transport(_) => true,
            _ => false,
        }
    }
}

pub trait ChatTransport: Send {
    /// One request, no retries. `phase` is informational for real endpoints;
    /// scripted transports check it.
    fn send(&mut self, phase: Phase, request: &ChatRequest) -> Result<ChatReply, ChatError>;
}

/// A string that never shows up in `Debug` output or serialized documents.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(***)")
    }
}

/// Where and how to reach a model. The URL and key stay out of logs and
/// event records.
#[derive(Clone, Debug)]
pub struct EndpointConfig {
    pub url: Secret,
    pub api_key: Secret,
    pub model: String,
    pub timeout: Duration,
}

impl EndpointConfig {
    pub const URL_VAR: &'static str = "SELFAI_ENDPOINT";
    pub const KEY_VAR: &'static str = "SELFAI_API_KEY";
    pub const MODEL_VAR: &'static str = "SELFAI_MODEL";

    /// Reads the endpoint from the environment; `url` overrides the variable.
    pub fn from_env(url: Option<&str>) -> Option<Self> {
        let url = url
            .map(str::to_string)
            .or_else(|| std::env::var(Self::URL_VAR).ok())
            .filter(|u| !u.trim().is_empty())?;
        Some(Self {
            url: Secret::new(url),
            api_key: Secret::new(std::env::var(Self::KEY_VAR).unwrap_or_default()),
            model: std::env::var(Self::MODEL_VAR).unwrap_or_else(|_| "gpt-4o-mini".into()),
            timeout: Duration::from_secs(120),
        })
    }
}

#[derive(Deserialize)]
struct WireReply {
    choices: Vec<WireChoice>,
    usage: Option<TokenUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

/// Reads `choices[0].message.content` from a chat-completions reply body.
pub fn decode_reply(body: &str) -> Result<ChatReply, ChatError> {
    let wire: WireReply =
        serde_json::from_str(body).map_err(|e| ChatError::BadResponse(e.to_string()))?;
    let choice = wire
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| ChatError::BadResponse("no choices".into()))?;
    let text = choice.message.content.unwrap_or_default();
    if text.is_empty() && choice.finish_reason.as_deref() == Some("length") {
        return Err(ChatError::BudgetExceeded);
    }
    Ok(ChatReply {
        text,
        usage: wire.usage,
        attempts: 1,
    })
}

/// POSTs requests as JSON to the configured URL.
pub struct HttpTransport {
    config: EndpointConfig,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(config: EndpointConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }
}

impl ChatTransport for HttpTransport {
    fn send(&mut self, _phase: Phase, request: &ChatRequest) -> Result<ChatReply, ChatError> {
        let mut req = self.agent.post(self.config.url.expose());
        if !self.config.api_key.is_empty() {
            req = req.header(
                "Authorization",
                &format!("Bearer {}", self.config.api_key.expose()),
            );
        }
        let mut resp = req.send_json(request).map_err(|e| match e {
            ureq::Error::Timeout(_) => ChatError::Timeout(self.config.timeout.as_millis() as u64),
            // The error text can carry the URL; keep only its kind.
            other => ChatError::Transport(error_kind(&other)),
        })?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| match e {
            ureq::Error::Timeout(_) => ChatError::Timeout(self.config.timeout.as_millis() as u64),
            other => ChatError::Transport(error_kind(&other)),
        })?;
        if !(200..300).contains(&status) {
            let mut body = body;
            body.truncate(512);
            return Err(ChatError::Endpoint { status, body });
        }
        decode_reply(&body)
    }
}

fn error_kind(e: &ureq::Error) -> String {
    match e {
        ureq::Error::Io(io) => format!("io: {:?}", io.kind()),
        ureq::Error::HostNotFound => "host not found".into(),
        ureq::Error::ConnectionFailed => "connection failed".into(),
        ureq::Error::StatusCode(s) => format!("status {s}"),
        _ => "request failed".into(),
    }
}

/// Spaces requests at least `60 / per_minute` seconds apart. Shared between
/// studies through an `Arc`.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn per_minute(n: u32) -> Self {
        Self {
            interval: Duration::from_secs(60) / n.max(1),
            next: Mutex::new(None),
        }
    }

    /// Blocks until the caller may send.
    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().expect("limiter lock");
            let now = Instant::now();
            let slot = next.map_or(now, |t| t.max(now));
            *next = Some(slot + self.interval);
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RetryConfig {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryConfig {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryConfig {
    /// Delay before retry number `n` (1-based): `base * 2^(n-1)`, capped.
    pub fn delay(&self, n: u32) -> Duration {
        let factor = 1u32.checked_shl(n.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

pub struct ChatClient {
    transport: Box<dyn ChatTransport>,
    pub retry: RetryConfig,
    limiter: Option<Arc<RateLimiter>>,
}

impl ChatClient {
    pub fn new(transport: Box<dyn ChatTransport>) -> Self {
        Self {
            transport,
            retry: RetryConfig::default(),
            limiter: None,
        }
    }

    pub fn with_retry(mut self, retry: RetryConfig) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_limiter(mut self, limiter: Arc<RateLimiter>) -> Self {
        self.limiter = Some(limiter);
        self
    }

    /// Sends with retries on transient failures. Timeouts are not retried.
    pub fn chat(&mut self, phase: Phase, request: &ChatRequest) -> Result<ChatReply, ChatError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            if let Some(l) = &self.limiter {
                l.acquire();
            }
            match self.transport.send(phase, request) {
                Ok(mut reply) => {
                    reply.attempts = attempt;
                    return Ok(reply);
                }
                Err(e) if e.is_transient() && attempt < self.retry.max_attempts => {
                    let delay = self.retry.delay(attempt);
                    log::warn!("chat attempt {attempt} failed ({e}); retrying in {delay:?}");
                    std::thread::sleep(delay);
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    struct Canned(VecDeque<Result<ChatReply, ChatError>>, u32);

    impl ChatTransport for Canned {
        fn send(&mut self, _: Phase, _: &ChatRequest) -> Result<ChatReply, ChatError> {
            self.1 += 1;
            self.0.pop_front().expect("scripted reply")
        }
    }

    fn reply(text: &str) -> Result<ChatReply, ChatError> {
        Ok(ChatReply {
            text: text.into(),
            usage: None,
            attempts: 1,
        })
    }

    fn request() -> ChatRequest {
        ChatRequest {
            model: "m".into(),
            messages: vec![ChatMessage::new(Role::User, "hi")],
            temperature: 0.0,
            max_tokens: 16,
        }
    }

    fn fast() -> RetryConfig {
        RetryConfig {
            max_attempts: 4,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    #[test]
    fn pass_through() {
        let mut c = ChatClient::new(Box::new(Canned(vec![reply("canned")].into(), 0)));
        assert_eq!(c.chat(Phase::Analysis, &request()).unwrap().text, "canned");
    }

    #[test]
    fn two_server_errors_then_success() {
        let e = || {
            Err(ChatError::Endpoint {
                status: 503,
                body: String::new(),
            })
        };
        let mut c = ChatClient::new(Box::new(Canned(vec![e(), e(), reply("ok")].into(), 0)))
            .with_retry(fast());
        let r = c.chat(Phase::Planning, &request()).unwrap();
        assert_eq!((r.text.as_str(), r.attempts), ("ok", 3));
    }

    #[test]
    fn timeout_is_not_retried() {
        let mut c = ChatClient::new(Box::new(Canned(
            vec![Err(ChatError::Timeout(10)), reply("late")].into(),
            0,
        )))
        .with_retry(fast());
        assert_eq!(c.chat(Phase::Planning, &request()), Err(ChatError::Timeout(10)));
    }

    #[test]
    fn client_errors_are_final() {
        let mut c = ChatClient::new(Box::new(Canned(
            vec![Err(ChatError::Endpoint { status: 401, body: String::new() })].into(),
            0,
        )))
        .with_retry(fast());
        assert!(matches!(
            c.chat(Phase::Planning, &request()),
            Err(ChatError::Endpoint { status: 401, .. })
        ));
    }

    #[test]
    fn backoff_doubles() {
        let r = RetryConfig {
            max_attempts: 5,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(350),
        };
        assert_eq!(r.delay(1), Duration::from_millis(100));
        assert_eq!(r.delay(2), Duration::from_millis(200));
        assert_eq!(r.delay(3), Duration::from_millis(350));
    }

    #[test]
    fn decode_first_choice() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"hello"},"finish_reason":"stop"}],"usage":{"prompt_tokens":3,"completion_tokens":1,"total_tokens":4}}"#;
        let r = decode_reply(body).unwrap();
        assert_eq!(r.text, "hello");
        assert_eq!(r.usage.unwrap().prompt_tokens, 3);
        assert!(matches!(decode_reply("{}"), Err(ChatError::BadResponse(_))));
        let cut = r#"{"choices":[{"message":{"content":""},"finish_reason":"length"}]}"#;
        assert_eq!(decode_reply(cut), Err(ChatError::BudgetExceeded));
    }

    #[test]
    fn secrets_do_not_debug_print() {
        let cfg = EndpointConfig {
            url: Secret::new("https://internal.example/v1/chat"),
            api_key: Secret::new("sk-very-secret"),
            model: "m".into(),
            timeout: Duration::from_secs(1),
        };
        let shown = format!("{cfg:?}");
        assert!(!shown.contains("sk-very-secret"));
        assert!(!shown.contains("internal.example"));
    }

    #[test]
    fn limiter_spaces_requests() {
        let l = RateLimiter::per_minute(600);
        let t = Instant::now();
        for _ in 0..3 {
            l.acquire();
        }
        assert!(t.elapsed() >= Duration::from_millis(190));
    }
}
