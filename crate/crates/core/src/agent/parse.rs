//! Readers for model answers: the stop verdict and the recommendation block.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::model::{SearchSpace, TrialConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopVerdict {
    pub stop: bool,
    pub confidence: f64,
    /// Per stop rule: stated met, stated not met, or not stated. Only the
    /// words "met"/"not met"/"unmet" count; a bare yes/no is ambiguous for
    /// the third rule.
    pub rule_findings: [Option<bool>; 3],
    /// Set when no usable answer could be found.
    pub flagged: bool,
    #[serde(skip)]
    pub raw_text: String,
}

fn answer_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)answer\W{0,4}(yes|no)\b").expect("valid"))
}

fn confidence_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)confidence(?:\s*score)?\W{0,4}([0-9]*\.?[0-9]+)\s*(%?)").expect("valid")
    })
}

fn rule_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?m)^[\s>*#-]*(?:rule\s*)?([123])\s*[.):]\s*(.*)$").expect("valid"))
}

fn finding_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(not\s+(?:been\s+|yet\s+)?met|unmet|met)\b").expect("valid"))
}

/// Reads the last `Answer: Yes|No` in `text` and the first confidence score
/// after it. Percentages are scaled to fractions; the result is clamped to
/// `[0, 1]`. Without an answer the verdict is "continue" at confidence 0 and
/// flagged. A stop rule the answer explicitly marks as not met vetoes a Yes.
pub fn parse_stop_answer(text: &str) -> StopVerdict {
    let Some(answer) = answer_re().captures_iter(text).last() else {
        return StopVerdict {
            stop: false,
            confidence: 0.0,
            rule_findings: [None; 3],
            flagged: true,
            raw_text: text.to_string(),
        };
    };
    let whole = answer.get(0).expect("match");
    let yes = answer[1].eq_ignore_ascii_case("yes");
    let after = &text[whole.start()..];
    let confidence = confidence_re().captures(after).and_then(|c| {
        let v: f64 = c[1].parse().ok()?;
        Some(if &c[2] == "%" || v > 1.0 { v / 100.0 } else { v })
    });
    let mut findings = [None; 3];
    for cap in rule_line_re().captures_iter(&text[..whole.start()]) {
        let idx: usize = cap[1].parse().expect("digit");
        if let Some(word) = finding_re().find(&cap[2]) {
            let w = word.as_str().to_ascii_lowercase();
            findings[idx - 1] = Some(w == "met");
        }
    }
    let vetoed = findings.contains(&Some(false));
    StopVerdict {
        stop: yes && !vetoed,
        confidence: confidence.unwrap_or(0.0).clamp(0.0, 1.0),
        rule_findings: findings,
        flagged: confidence.is_none(),
        raw_text: text.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub number: usize,
    pub config: TrialConfig,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecommendationError {
    #[error("`{value}` is not a value of `{dimension}`; use only values listed in the Search Space")]
    InvalidValue { dimension: String, value: String },
    #[error("a recommendation is missing `{0}`; every trial must set all of the params")]
    MissingDimension(String),
    #[error("expected {expected} new unexplored trials but found {found}")]
    WrongCount { expected: usize, found: usize },
}

fn block_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^\s*(?:[-*]\s*)?(?:\*\*)?(?:trial\s*)?#?\s*(\d+)\s*(?:\*\*)?\s*[:.)\-]\s*(.*)$")
            .expect("valid")
    })
}

fn list_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:\d+[.)]|[-*])\s+(.*)$").expect("valid"))
}

fn strip_wrapping(s: &str) -> &str {
    s.trim()
        .trim_matches(|c: char| matches!(c, '{' | '}' | '(' | ')' | '[' | ']' | '*' | '`'))
        .trim()
}

/// `name=value` (or `name: value`) pairs from a comma-separated body.
fn pairs(body: &str) -> Vec<(String, String)> {
    let body = match body.find(" -- ").or_else(|| body.find(" | ")) {
        Some(i) => &body[..i],
        None => body,
    };
    strip_wrapping(body)
        .split(',')
        .filter_map(|part| {
            let (k, v) = part.split_once('=').or_else(|| part.split_once(':'))?;
            let k = strip_wrapping(k).trim_matches(|c| c == '"' || c == '\'');
            let v = strip_wrapping(v).trim_matches(|c| c == '"' || c == '\'');
            (!k.is_empty()).then(|| (k.to_string(), v.trim().to_string()))
        })
        .collect()
}

fn to_config(space: &SearchSpace, pairs: &[(String, String)]) -> Result<TrialConfig, RecommendationError> {
    let mut config = TrialConfig::new();
    for (k, v) in pairs {
        let Some(dim) = space.dimension(k) else {
            return Err(RecommendationError::InvalidValue {
                dimension: k.clone(),
                value: v.clone(),
            });
        };
        let Some(value) = dim.values.iter().find(|c| c.matches_token(v)) else {
            return Err(RecommendationError::InvalidValue {
                dimension: k.clone(),
                value: v.clone(),
            });
        };
        config.insert(dim.name.clone(), value.clone());
    }
    let mut ordered = TrialConfig::new();
    for dim in space.dimensions() {
        match config.get(&dim.name) {
            Some(v) => {
                ordered.insert(dim.name.clone(), v.clone());
            }
            None => return Err(RecommendationError::MissingDimension(dim.name.clone())),
        }
    }
    Ok(ordered)
}

/// Candidate param lists: the lines of the last `RECOMMENDATIONS:` block, or
/// failing that any list item that sets a known dimension.
fn candidate_lines(text: &str, space: &SearchSpace) -> Vec<Vec<(String, String)>> {
    let lower = text.to_ascii_lowercase();
    if let Some(pos) = lower.rfind("recommendations:") {
        let block = &text[pos + "recommendations:".len()..];
        let found: Vec<_> = block
            .lines()
            .filter_map(|l| block_line_re().captures(l).map(|c| pairs(&c[2])))
            .filter(|p| !p.is_empty())
            .collect();
        if !found.is_empty() {
            return found;
        }
    }
    text.lines()
        .filter_map(|l| list_line_re().captures(l))
        .map(|c| {
            let body = c[1].to_string();
            match block_line_re().captures(&body) {
                Some(inner) => pairs(&inner[2]),
                None => pairs(&body),
            }
        })
        .filter(|p| p.iter().any(|(k, _)| space.dimension(k).is_some()))
        .collect()
}

/// Extracts exactly `required` new configs from an answer.
///
/// The params are authoritative: the config number is recomputed from them.
/// Duplicates and already-explored configs are dropped; extra picks beyond
/// `required` are ignored. Any invalid pick fails the whole answer.
pub fn parse_recommendations(
    text: &str,
    space: &SearchSpace,
    explored: &BTreeSet<usize>,
    required: usize,
) -> Result<Vec<Recommendation>, RecommendationError> {
    let reasoning = match text.to_ascii_lowercase().rfind("recommendations:") {
        Some(pos) => text[..pos].trim().to_string(),
        None => text.trim().to_string(),
    };
    let mut out: Vec<Recommendation> = Vec::new();
    for p in candidate_lines(text, space) {
        let config = to_config(space, &p)?;
        let number = space.number_of(&config).expect("validated");
        if explored.contains(&number) || out.iter().any(|r| r.number == number) {
            continue;
        }
        out.push(Recommendation {
            number,
            config,
            reasoning: reasoning.clone(),
        });
    }
    if out.len() < required {
        return Err(RecommendationError::WrongCount {
            expected: required,
            found: out.len(),
        });
    }
    out.truncate(required);
    Ok(out)
}
