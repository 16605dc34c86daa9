//! The language-model solver in its three modes.
//!
//! `cognitive` holds one conversation per round: task and trial analysis,
//! then the stop judgement, then planning. `llm` asks only for
//! recommendations and `llm-es` asks the short stop question first.

use serde::{Deserialize, Serialize};

use super::chat::{ChatClient, ChatError, ChatMessage, ChatRequest, Role};
use super::parse::{parse_recommendations, parse_stop_answer};
use super::prompts::{check_budget, PromptBundle, PromptInputs};
use super::trace::{ReasoningRecord, TraceSink};
use super::AgentError;
use crate::model::{SolverDecision, Suggestion};
use crate::solvers::{Solver, SolverContext, SolverError, TpeSolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentMode {
    Cognitive,
    Llm,
    LlmEs,
}

impl AgentMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentMode::Cognitive => "cognitive",
            AgentMode::Llm => "llm",
            AgentMode::LlmEs => "llm-es",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub mode: AgentMode,
    /// Minimum confidence for a stop verdict to end the study.
    pub threshold: f64,
    /// Corrective re-prompts after an unusable recommendation answer.
    pub max_reprompts: u32,
    /// Longest unexplored listing put into a prompt.
    pub unexplored_cap: usize,
    /// Token budget of the model's context window.
    pub context_tokens: usize,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model: String,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            mode: AgentMode::Cognitive,
            threshold: 0.7,
            max_reprompts: 2,
            unexplored_cap: 200,
            context_tokens: 128_000,
            temperature: 0.0,
            max_tokens: 4096,
            model: "gpt-4o-mini".into(),
        }
    }
}

pub struct CognitiveAgent {
    pub config: AgentConfig,
    client: ChatClient,
}

/// Why a round could not finish with the model.
enum Abort {
    /// Give this round to the fallback solver.
    Fallback(String),
    Fatal(AgentError),
}

struct Round<'c> {
    number: u32,
    messages: Vec<ChatMessage>,
    clock: &'c dyn crate::clock::Clock,
}

impl CognitiveAgent {
    pub fn new(config: AgentConfig, client: ChatClient) -> Self {
        Self { config, client }
    }

    /// Sends `bundle` as the next user turn. The returned record still needs
    /// its outcome filled in.
    fn exchange(
        &mut self,
        round: &mut Round<'_>,
        bundle: &PromptBundle,
        attempt: u32,
        trace: &mut dyn TraceSink,
    ) -> Result<(String, ReasoningRecord), Abort> {
        let mut record = ReasoningRecord {
            round: round.number,
            phase: bundle.phase,
            attempt,
            prompt: bundle.user_text.clone(),
            response: None,
            outcome: None,
            started_ms: round.clock.now_ms(),
            elapsed_ms: 0,
            usage: None,
            error: None,
        };
        let history_chars: usize = round.messages.iter().map(|m| m.content.chars().count()).sum();
        if let Err(e) = check_budget(history_chars, bundle, self.config.context_tokens) {
            record.error = Some(e.to_string());
            trace.record(record);
            return Err(Abort::Fatal(e));
        }
        let mut messages = round.messages.clone();
        messages.push(ChatMessage::new(Role::User, bundle.user_text.clone()));
        let request = ChatRequest {
            model: self.config.model.clone(),
            messages,
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
        };
        let result = self.client.chat(bundle.phase, &request);
        record.elapsed_ms = round.clock.now_ms().saturating_sub(record.started_ms);
        match result {
            Ok(reply) => {
                round.messages = request.messages;
                round
                    .messages
                    .push(ChatMessage::new(Role::Assistant, reply.text.clone()));
                record.response = Some(reply.text.clone());
                record.usage = reply.usage;
                Ok((reply.text, record))
            }
            Err(e) => {
                record.error = Some(e.to_string());
                trace.record(record);
                Err(match e {
                    ChatError::Playbook(m) => Abort::Fatal(AgentError::Playbook(m)),
                    other => Abort::Fallback(format!("model call failed: {other}")),
                })
            }
        }
    }

    /// Returns a confident stop, or `None` to go on.
    fn stop_phase(
        &mut self,
        round: &mut Round<'_>,
        bundle: PromptBundle,
        trace: &mut dyn TraceSink,
    ) -> Result<Option<SolverDecision>, Abort> {
        let (text, mut record) = self.exchange(round, &bundle, 0, trace)?;
        let verdict = parse_stop_answer(&text);
        record.outcome = serde_json::to_value(&verdict).ok();
        trace.record(record);
        if verdict.stop && verdict.confidence >= self.config.threshold {
            return Ok(Some(SolverDecision::stop(verdict.confidence, text.trim())));
        }
        Ok(None)
    }

    fn plan_phase(
        &mut self,
        ctx: &SolverContext<'_>,
        round: &mut Round<'_>,
        mut bundle: PromptBundle,
        required: usize,
        trace: &mut dyn TraceSink,
    ) -> Result<SolverDecision, Abort> {
        let explored = ctx.explored();
        let mut last_error = String::new();
        for attempt in 0..=self.config.max_reprompts {
            let (text, mut record) = self.exchange(round, &bundle, attempt, trace)?;
            match parse_recommendations(&text, &ctx.study.space, &explored, required) {
                Ok(recs) => {
                    record.outcome = serde_json::to_value(&recs).ok();
                    trace.record(record);
                    let rationale = recs.first().map(|r| r.reasoning.clone()).unwrap_or_default();
                    let suggestions = recs
                        .into_iter()
                        .map(|r| Suggestion {
                            number: r.number,
                            config: r.config,
                        })
                        .collect();
                    return Ok(SolverDecision::Suggest {
                        suggestions,
                        rationale,
                        origin: self.config.mode.as_str().to_string(),
                    });
                }
                Err(e) => {
                    record.error = Some(e.to_string());
                    trace.record(record);
                    last_error = e.to_string();
                    bundle = PromptBundle {
                        phase: bundle.phase,
                        system_text: bundle.system_text.clone(),
                        user_text: format!(
                            "Your previous answer could not be used: {e}. Recommend exactly {required} unexplored trials again and end with the RECOMMENDATIONS: block."
                        ),
                    };
                }
            }
        }
        Err(Abort::Fallback(format!(
            "no usable recommendations after {} attempts: {last_error}",
            self.config.max_reprompts + 1
        )))
    }

    fn run_round(
        &mut self,
        ctx: &SolverContext<'_>,
        required: usize,
        unexplored: &[usize],
        trace: &mut dyn TraceSink,
    ) -> Result<SolverDecision, Abort> {
        let inputs = PromptInputs {
            study: ctx.study,
            unexplored,
            n_jobs: required,
            cap: self.config.unexplored_cap,
        };
        let mut round = Round {
            number: ctx.study.round + 1,
            messages: vec![ChatMessage::new(Role::System, ctx.study.system_context.clone())],
            clock: ctx.clock,
        };
        match self.config.mode {
            AgentMode::Cognitive => {
                let analysis = inputs.analysis();
                let (_, record) = self.exchange(&mut round, &analysis, 0, trace)?;
                trace.record(record);
                if let Some(stop) = self.stop_phase(&mut round, inputs.stop(), trace)? {
                    return Ok(stop);
                }
                self.plan_phase(ctx, &mut round, inputs.plan(), required, trace)
            }
            AgentMode::Llm => self.plan_phase(ctx, &mut round, inputs.baseline_search(), required, trace),
            AgentMode::LlmEs => {
                if let Some(stop) = self.stop_phase(&mut round, inputs.baseline_stop(), trace)? {
                    return Ok(stop);
                }
                self.plan_phase(ctx, &mut round, inputs.baseline_search(), required, trace)
            }
        }
    }
}

impl Solver for CognitiveAgent {
    fn name(&self) -> &str {
        self.config.mode.as_str()
    }

    fn decide(
        &mut self,
        ctx: &SolverContext<'_>,
        trace: &mut dyn TraceSink,
    ) -> Result<SolverDecision, SolverError> {
        let unexplored = ctx.unexplored();
        if unexplored.is_empty() {
            return Ok(SolverDecision::stop(1.0, "every configuration has been tried"));
        }
        let required = ctx.requested.max(1).min(unexplored.len());
        match self.run_round(ctx, required, &unexplored, trace) {
            Ok(d) => Ok(d),
            Err(Abort::Fatal(e)) => Err(e.into()),
            Err(Abort::Fallback(reason)) => {
                log::warn!("round {} falls back to tpe: {reason}", ctx.study.round + 1);
                let d = TpeSolver::default().decide(ctx, trace)?;
                Ok(match d {
                    SolverDecision::Suggest { suggestions, .. } => SolverDecision::Suggest {
                        suggestions,
                        rationale: reason,
                        origin: "tpe-fallback".into(),
                    },
                    stop => stop,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::chat::{ChatReply, ChatTransport, RetryConfig};
    use crate::agent::Phase;
    use crate::agent::scripted::{PlaybookEntry, ScriptedTransport};
    use crate::clock::StepClock;
    use crate::model::{Direction, Study};
    use crate::solvers::testing::{grid_study, record};
    use std::time::Duration;

    fn entry(phase: Phase, text: &str) -> PlaybookEntry {
        PlaybookEntry {
            expect_phase: phase,
            response_text: text.into(),
        }
    }

    fn agent(mode: AgentMode, entries: Vec<PlaybookEntry>) -> CognitiveAgent {
        CognitiveAgent::new(
            AgentConfig {
                mode,
                ..AgentConfig::default()
            },
            ChatClient::new(Box::new(ScriptedTransport::new(entries))),
        )
    }

    fn decide(agent: &mut CognitiveAgent, study: &Study, requested: usize) -> (Result<SolverDecision, SolverError>, Vec<ReasoningRecord>) {
        let clock = StepClock::new(0, 1);
        let ctx = SolverContext {
            study,
            requested,
            seed: 1,
            clock: &clock,
        };
        let mut trace = Vec::new();
        let r = agent.decide(&ctx, &mut trace);
        (r, trace)
    }

    const RECS: &str = "Both look promising.\nRECOMMENDATIONS:\ntrial 5: a=1, b=1\ntrial 6: a=1, b=2";

    #[test]
    fn no_then_two_recommendations() {
        let s = grid_study(&[2, 4], Direction::Maximize);
        let mut a = agent(
            AgentMode::Cognitive,
            vec![
                entry(Phase::Analysis, "analysis"),
                entry(Phase::StopJudgement, "Answer: No with confidence score: 0.9"),
                entry(Phase::Planning, RECS),
            ],
        );
        let (d, trace) = decide(&mut a, &s, 2);
        let d = d.unwrap();
        let numbers: Vec<usize> = d.suggestions().iter().map(|p| p.number).collect();
        assert_eq!(numbers, vec![5, 6]);
        assert_eq!(trace.len(), 3);
        assert_eq!(trace[1].outcome.as_ref().unwrap()["stop"], false);
        assert!(trace.iter().all(|r| r.round == 1));
    }

    #[test]
    fn confident_yes_stops() {
        let s = grid_study(&[2, 4], Direction::Maximize);
        let mut a = agent(
            AgentMode::Cognitive,
            vec![
                entry(Phase::Analysis, "analysis"),
                entry(Phase::StopJudgement, "Answer: Yes, with confidence score: 0.95"),
            ],
        );
        match decide(&mut a, &s, 2).0.unwrap() {
            SolverDecision::Stop { confidence, .. } => assert_eq!(confidence, 0.95),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unconfident_yes_continues_to_planning() {
        let s = grid_study(&[2, 4], Direction::Maximize);
        let mut a = agent(
            AgentMode::Cognitive,
            vec![
                entry(Phase::Analysis, "analysis"),
                entry(Phase::StopJudgement, "Answer: Yes, with confidence score: 0.5"),
                entry(Phase::Planning, RECS),
            ],
        );
        assert!(!decide(&mut a, &s, 2).0.unwrap().is_stop());
    }

    #[test]
    fn unreachable_threshold_never_stops() {
        let s = grid_study(&[2, 4], Direction::Maximize);
        let mut a = agent(
            AgentMode::Cognitive,
            vec![
                entry(Phase::Analysis, "analysis"),
                entry(Phase::StopJudgement, "Answer: Yes, with confidence score: 1.0"),
                entry(Phase::Planning, RECS),
            ],
        );
        a.config.threshold = 1.01;
        assert!(!decide(&mut a, &s, 2).0.unwrap().is_stop());
    }

    #[test]
    fn reprompts_then_succeeds() {
        let s = grid_study(&[2, 4], Direction::Maximize);
        let mut a = agent(
            AgentMode::Llm,
            vec![
                entry(Phase::BaselineSearch, "RECOMMENDATIONS:\ntrial 1: a=7, b=1"),
                entry(Phase::BaselineSearch, RECS),
            ],
        );
        let (d, trace) = decide(&mut a, &s, 2);
        assert_eq!(d.unwrap().suggestions().len(), 2);
        assert_eq!(trace.len(), 2);
        assert!(trace[0].error.as_ref().unwrap().contains("`7`"));
        assert_eq!(trace[1].attempt, 1);
        assert!(trace[1].prompt.starts_with("Your previous answer could not be used"));
    }

    #[test]
    fn falls_back_after_three_bad_answers() {
        let mut s = grid_study(&[2, 4], Direction::Maximize);
        record(&mut s, 5, 1.0);
        let bad = "RECOMMENDATIONS:\ntrial 5: a=1, b=1";
        let mut a = agent(
            AgentMode::Llm,
            vec![
                entry(Phase::BaselineSearch, bad),
                entry(Phase::BaselineSearch, bad),
                entry(Phase::BaselineSearch, bad),
            ],
        );
        match decide(&mut a, &s, 1).0.unwrap() {
            SolverDecision::Suggest { suggestions, origin, .. } => {
                assert_eq!(origin, "tpe-fallback");
                assert_ne!(suggestions[0].number, 5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn llm_es_asks_stop_first() {
        let s = grid_study(&[2, 4], Direction::Maximize);
        let mut a = agent(
            AgentMode::LlmEs,
            vec![
                entry(Phase::BaselineStop, "Answer: No with confidence score: 0.8"),
                entry(Phase::BaselineSearch, RECS),
            ],
        );
        let (d, trace) = decide(&mut a, &s, 2);
        assert_eq!(d.unwrap().suggestions().len(), 2);
        assert_eq!(trace[0].phase, Phase::BaselineStop);
    }

    #[test]
    fn playbook_mismatch_is_fatal() {
        let s = grid_study(&[2, 4], Direction::Maximize);
        let mut a = agent(AgentMode::Cognitive, vec![entry(Phase::Planning, RECS)]);
        assert!(matches!(
            decide(&mut a, &s, 2).0,
            Err(SolverError::Agent(AgentError::Playbook(_)))
        ));
    }

    struct Slow;
    impl ChatTransport for Slow {
        fn send(&mut self, _: Phase, _: &ChatRequest) -> Result<ChatReply, ChatError> {
            Err(ChatError::Timeout(5))
        }
    }

    #[test]
    fn timeout_is_recorded_and_round_falls_back() {
        let s = grid_study(&[2, 4], Direction::Maximize);
        let mut a = CognitiveAgent::new(
            AgentConfig::default(),
            ChatClient::new(Box::new(Slow)).with_retry(RetryConfig {
                max_attempts: 3,
                base_delay: Duration::ZERO,
                max_delay: Duration::ZERO,
            }),
        );
        let (d, trace) = decide(&mut a, &s, 1);
        assert!(matches!(d.unwrap(), SolverDecision::Suggest { origin, .. } if origin == "tpe-fallback"));
        assert!(trace[0].error.as_ref().unwrap().contains("timed out"));
    }

    #[test]
    fn context_budget_is_enforced() {
        let s = grid_study(&[40, 50], Direction::Maximize);
        let mut a = agent(AgentMode::Llm, vec![]);
        a.config.context_tokens = 500;
        assert!(matches!(
            decide(&mut a, &s, 1).0,
            Err(SolverError::Agent(AgentError::ContextBudgetExceeded { .. }))
        ));
    }
}
