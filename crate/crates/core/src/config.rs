//! Study configuration documents: the two-role YAML template a researcher (or
//! a model, from a summary) fills in, and its parser.
//!
//! ```yaml
//! - role: system
//!   content:
//!     model: ...
//!     search_space:
//!       lr: [0.1, 0.01]
//!     instrustion: ...
//! - role: user
//!   content:
//!     max_trials: 20
//!     trials: []
//! ```
//!
//! The misspelt key `instrustion` is the canonical one; `instruction` is read
//! too. Keys the template does not know are kept and written back unchanged.
//! Each entry of `trials` maps every dimension to a value and is submitted
//! before the solver is first consulted. The optional user keys `direction`,
//! `metric` and `n_jobs` default to maximize, `value` and 1.

use serde_yaml::{Mapping, Value};

use crate::agent::prompts::fill;
use crate::agent::{ChatClient, ChatError, ChatMessage, ChatRequest, Phase, Role};
use crate::model::{Dimension, Direction, Scalar, SearchSpace, StudyHeader, TrialConfig};

// Three lines end in a space; they are spelled out so editors keep it.
pub const CONFIG_TEMPLATE: &str = concat!(
    "# Template for Configuration Interaction \n",
    "# to convert Idea Interaction into YAML format\n",
    "- role: system\n",
    "  content:\n",
    "    model: $modelName\n",
    "    description: You are a $role specializing in \n",
    "                studying $taskName. Please provide \n",
    "                professional and detailed answers.\n",
    "    task: $taskName\n",
    "    basic_idea: $basic_idea\n",
    "    search_space:\n",
    "      $hyper_name1: []\n",
    "      $hyper_name2: []\n",
    "      ...\n",
    "    link: $paperLink\n",
    "    instrustion: Complete instructions under limited trials.\n",
    "- role: user\n",
    "  content:\n",
    "    max_trials: $maxTrials\n",
    "    trials: []",
);

const CONFIG_PROMPT: &str = "{SUMMARIZED_CONTENT}

Please fill out the content following the YAML format:

{TEMPLATE}";

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub model: String,
    pub description: String,
    pub task: String,
    pub basic_idea: String,
    pub search_space: SearchSpace,
    pub link: String,
    pub instruction: String,
    pub max_trials: usize,
    /// Configs to evaluate first.
    pub trials: Vec<TrialConfig>,
    pub direction: Option<Direction>,
    pub metric: Option<String>,
    pub n_jobs: Option<usize>,
    /// Unrecognized keys of the system and user blocks, in document order.
    pub extra_system: Mapping,
    pub extra_user: Mapping,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("malformed config at {path}: {reason}")]
    MalformedDocument { path: String, reason: String },
    #[error("empty search space at {path}")]
    EmptySearchSpace { path: String },
    #[error("bad max_trials at {path}: {found}")]
    BadMaxTrials { path: String, found: String },
    #[error("the summary is empty")]
    EmptySummary,
}

fn malformed(path: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::MalformedDocument {
        path: path.to_string(),
        reason: reason.into(),
    }
}

/// The prompt asking a model to turn `summary` into a filled template.
pub fn render_config_prompt(summary: &str) -> Result<String, ConfigError> {
    if summary.trim().is_empty() {
        return Err(ConfigError::EmptySummary);
    }
    Ok(fill(
        CONFIG_PROMPT,
        &[("SUMMARIZED_CONTENT", summary), ("TEMPLATE", CONFIG_TEMPLATE)],
    ))
}

fn scalar_of(v: &Value, path: &str) -> Result<Scalar, ConfigError> {
    Ok(match v {
        Value::Number(n) => match n.as_i64() {
            Some(i) => Scalar::Int(i),
            None => Scalar::Float(n.as_f64().ok_or_else(|| malformed(path, "number out of range"))?),
        },
        Value::String(s) => Scalar::parse_token(s),
        Value::Bool(b) => Scalar::Str(b.to_string()),
        Value::Null => Scalar::Str("None".into()),
        _ => return Err(malformed(path, "expected a scalar value")),
    })
}

fn yaml_of(s: &Scalar) -> Value {
    match s {
        Scalar::Int(i) => Value::from(*i),
        Scalar::Float(f) => Value::from(*f),
        Scalar::Str(t) => Value::String(t.clone()),
    }
}

fn text_field(block: &mut Mapping, key: &str, path: &str) -> Result<String, ConfigError> {
    match block.remove(key) {
        None | Some(Value::Null) => Ok(String::new()),
        Some(Value::String(s)) => Ok(s),
        Some(Value::Number(n)) => Ok(n.to_string()),
        Some(Value::Bool(b)) => Ok(b.to_string()),
        Some(_) => Err(malformed(&format!("{path}.{key}"), "expected text")),
    }
}

fn content_of(item: &Value, index: usize) -> Result<(String, Mapping), ConfigError> {
    let path = format!("[{index}]");
    let map = item
        .as_mapping()
        .ok_or_else(|| malformed(&path, "expected a mapping with role and content"))?;
    let role = map
        .get("role")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed(&format!("{path}.role"), "missing"))?
        .to_string();
    let content = match map.get("content") {
        Some(Value::Mapping(m)) => m.clone(),
        Some(Value::Null) | None => Mapping::new(),
        Some(_) => return Err(malformed(&format!("{path}.content"), "expected a mapping")),
    };
    Ok((role, content))
}

fn parse_space(value: Option<Value>, path: &str) -> Result<SearchSpace, ConfigError> {
    let map = match value {
        Some(Value::Mapping(m)) => m,
        Some(Value::Null) | None => return Err(ConfigError::EmptySearchSpace { path: path.into() }),
        Some(_) => return Err(malformed(path, "expected a mapping of dimension lists")),
    };
    if map.is_empty() {
        return Err(ConfigError::EmptySearchSpace { path: path.into() });
    }
    let mut dims = Vec::new();
    for (k, v) in map {
        let name = match &k {
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            _ => return Err(malformed(path, "dimension names must be text")),
        };
        let dpath = format!("{path}.{name}");
        let values = match v {
            Value::Sequence(items) => items,
            _ => return Err(malformed(&dpath, "expected a list of values")),
        };
        if values.is_empty() {
            return Err(ConfigError::EmptySearchSpace { path: dpath });
        }
        let scalars = values
            .iter()
            .enumerate()
            .map(|(i, v)| scalar_of(v, &format!("{dpath}[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        dims.push(Dimension::new(name, scalars));
    }
    SearchSpace::new(dims).map_err(|e| malformed(path, e.to_string()))
}

fn parse_max_trials(value: Option<Value>, path: &str) -> Result<usize, ConfigError> {
    let bad = |found: String| ConfigError::BadMaxTrials {
        path: path.into(),
        found,
    };
    match value {
        Some(Value::Number(n)) => match n.as_u64() {
            Some(m) if m >= 1 => Ok(m as usize),
            _ => Err(bad(n.to_string())),
        },
        Some(Value::String(s)) => match s.trim().parse::<usize>() {
            Ok(m) if m >= 1 => Ok(m),
            _ => Err(bad(s)),
        },
        Some(other) => Err(bad(serde_yaml::to_string(&other).unwrap_or_default().trim().to_string())),
        None => Err(bad("missing".into())),
    }
}

fn parse_seed(item: &Value, space: &SearchSpace, path: &str) -> Result<TrialConfig, ConfigError> {
    let map = item
        .as_mapping()
        .ok_or_else(|| malformed(path, "expected a mapping of dimension values"))?;
    let mut config = TrialConfig::new();
    for dim in space.dimensions() {
        let v = map
            .get(dim.name.as_str())
            .ok_or_else(|| malformed(path, format!("missing dimension `{}`", dim.name)))?;
        config.insert(dim.name.clone(), scalar_of(v, &format!("{path}.{}", dim.name))?);
    }
    if map.len() != config.len() {
        return Err(malformed(path, "names a dimension outside the search space"));
    }
    space.validate(&config).map_err(|e| malformed(path, e.to_string()))?;
    Ok(config)
}

/// Parses a filled template. Markdown code fences around it are ignored.
pub fn parse_config(text: &str) -> Result<StudyConfig, ConfigError> {
    let body = strip_fences(text);
    let doc: Value = serde_yaml::from_str(body).map_err(|e| malformed("$", e.to_string()))?;
    let items = doc
        .as_sequence()
        .ok_or_else(|| malformed("$", "expected a list of role entries"))?;
    if items.len() != 2 {
        return Err(malformed("$", format!("expected 2 role entries, found {}", items.len())));
    }
    let (r0, mut system) = content_of(&items[0], 0)?;
    let (r1, mut user) = content_of(&items[1], 1)?;
    if r0 != "system" {
        return Err(malformed("[0].role", format!("expected `system`, found `{r0}`")));
    }
    if r1 != "user" {
        return Err(malformed("[1].role", format!("expected `user`, found `{r1}`")));
    }
    let sp = "[0].content";
    let search_space = parse_space(system.remove("search_space"), &format!("{sp}.search_space"))?;
    let model = text_field(&mut system, "model", sp)?;
    let description = text_field(&mut system, "description", sp)?;
    let task = text_field(&mut system, "task", sp)?;
    let basic_idea = text_field(&mut system, "basic_idea", sp)?;
    let link = text_field(&mut system, "link", sp)?;
    let mut instruction = text_field(&mut system, "instrustion", sp)?;
    if instruction.is_empty() {
        instruction = text_field(&mut system, "instruction", sp)?;
    }

    let up = "[1].content";
    let max_trials = parse_max_trials(user.remove("max_trials"), &format!("{up}.max_trials"))?;
    let trials = match user.remove("trials") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Sequence(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| parse_seed(v, &search_space, &format!("{up}.trials[{i}]")))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(malformed(&format!("{up}.trials"), "expected a list")),
    };
    let direction = match user.remove("direction") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(
            Direction::parse(&s)
                .ok_or_else(|| malformed(&format!("{up}.direction"), format!("unknown direction `{s}`")))?,
        ),
        Some(_) => return Err(malformed(&format!("{up}.direction"), "expected text")),
    };
    let metric = Some(text_field(&mut user, "metric", up)?).filter(|m| !m.is_empty());
    let n_jobs = match user.remove("n_jobs") {
        None | Some(Value::Null) => None,
        Some(Value::Number(n)) if n.as_u64().is_some_and(|j| j >= 1) => Some(n.as_u64().unwrap() as usize),
        Some(_) => return Err(malformed(&format!("{up}.n_jobs"), "expected a positive integer")),
    };
    Ok(StudyConfig {
        model,
        description,
        task,
        basic_idea,
        search_space,
        link,
        instruction,
        max_trials,
        trials,
        direction,
        metric,
        n_jobs,
        extra_system: system,
        extra_user: user,
    })
}

fn strip_fences(text: &str) -> &str {
    let t = text.trim();
    let Some(start) = t.find("```") else {
        return t;
    };
    let after = &t[start + 3..];
    let after = after.split_once('\n').map(|(_, rest)| rest).unwrap_or("");
    match after.find("```") {
        Some(end) => &after[..end],
        None => after,
    }
}

impl StudyConfig {
    fn system_block(&self) -> Mapping {
        let mut m = Mapping::new();
        m.insert("model".into(), self.model.clone().into());
        m.insert("description".into(), self.description.clone().into());
        m.insert("task".into(), self.task.clone().into());
        m.insert("basic_idea".into(), self.basic_idea.clone().into());
        let mut space = Mapping::new();
        for d in self.search_space.dimensions() {
            space.insert(
                d.name.clone().into(),
                Value::Sequence(d.values.iter().map(yaml_of).collect()),
            );
        }
        m.insert("search_space".into(), Value::Mapping(space));
        m.insert("link".into(), self.link.clone().into());
        m.insert("instrustion".into(), self.instruction.clone().into());
        for (k, v) in &self.extra_system {
            m.insert(k.clone(), v.clone());
        }
        m
    }

    fn user_block(&self) -> Mapping {
        let mut m = Mapping::new();
        m.insert("max_trials".into(), Value::from(self.max_trials as u64));
        let seeds = self
            .trials
            .iter()
            .map(|c| {
                Value::Mapping(
                    c.iter()
                        .map(|(k, v)| (Value::String(k.clone()), yaml_of(v)))
                        .collect(),
                )
            })
            .collect();
        m.insert("trials".into(), Value::Sequence(seeds));
        if let Some(d) = self.direction {
            let name = match d {
                Direction::Maximize => "maximize",
                Direction::Minimize => "minimize",
            };
            m.insert("direction".into(), name.into());
        }
        if let Some(metric) = &self.metric {
            m.insert("metric".into(), metric.clone().into());
        }
        if let Some(n) = self.n_jobs {
            m.insert("n_jobs".into(), Value::from(n as u64));
        }
        for (k, v) in &self.extra_user {
            m.insert(k.clone(), v.clone());
        }
        m
    }

    /// Writes the config back as a two-role document.
    pub fn emit(&self) -> String {
        let role = |name: &str, content: Mapping| {
            let mut m = Mapping::new();
            m.insert("role".into(), name.into());
            m.insert("content".into(), Value::Mapping(content));
            Value::Mapping(m)
        };
        let doc = Value::Sequence(vec![
            role("system", self.system_block()),
            role("user", self.user_block()),
        ]);
        serde_yaml::to_string(&doc).expect("plain YAML values serialize")
    }

    /// The system block as YAML; this is what the agent receives as its
    /// system message.
    pub fn system_context(&self) -> String {
        serde_yaml::to_string(&Value::Mapping(self.system_block())).expect("plain YAML values serialize")
    }

    pub fn header(&self, id: impl Into<String>, solver: impl Into<String>, n_jobs: Option<usize>) -> StudyHeader {
        StudyHeader {
            id: id.into(),
            space: self.search_space.clone(),
            direction: self.direction.unwrap_or(Direction::Maximize),
            max_trials: self.max_trials,
            n_jobs: n_jobs.or(self.n_jobs).unwrap_or(1),
            solver: solver.into(),
            system_context: self.system_context(),
            metric: self.metric.clone().unwrap_or_else(|| "value".into()),
        }
    }

    /// Config numbers of the seed trials.
    pub fn seed_numbers(&self) -> Vec<usize> {
        self.trials
            .iter()
            .map(|c| self.search_space.number_of(c).expect("validated while parsing"))
            .collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DraftError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Chat(#[from] ChatError),
}

/// Asks a model to fill the template from `summary`. Returns the raw reply
/// next to the parsed config; a person should read both before running it.
pub fn draft_config(
    summary: &str,
    client: &mut ChatClient,
    model: &str,
) -> Result<(String, StudyConfig), DraftError> {
    let prompt = render_config_prompt(summary)?;
    let request = ChatRequest {
        model: model.to_string(),
        messages: vec![ChatMessage::new(Role::User, prompt)],
        temperature: 0.0,
        max_tokens: 2048,
    };
    let reply = client.chat(Phase::ConfigDraft, &request)?;
    let config = parse_config(&reply.text)?;
    Ok((reply.text, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{PlaybookEntry, ScriptedTransport};
    use proptest::prelude::*;

    pub(crate) const BOSTON: &str = "- role: system
  content:
    model: gpt-4o-mini
    description: You are a data scientist specializing in
                studying house price regression. Please provide
                professional and detailed answers.
    task: house price regression
    basic_idea: random forest regression on the Boston housing data
    search_space:
      n-estimators: [100, 200, 300]
      max-depth: [None, 10, 20]
      min-samples-split: [2, 5, 10]
      min-samples-leaf: [1, 2, 5]
      max-features: [\"sqrt\", \"log2\"]
    link: https://example.org/boston
    instrustion: Complete instructions under limited trials.
- role: user
  content:
    max_trials: 162
    trials: []
";

    #[test]
    fn boston_template() {
        let c = parse_config(BOSTON).unwrap();
        assert_eq!(c.search_space.dimensions().len(), 5);
        assert_eq!(c.search_space.cardinality(), 162);
        assert_eq!(
            c.search_space.dimension("max-depth").unwrap().values,
            vec![Scalar::Str("None".into()), Scalar::Int(10), Scalar::Int(20)]
        );
        assert_eq!(c.max_trials, 162);
        assert_eq!(c.instruction, "Complete instructions under limited trials.");
        assert!(c.system_context().contains("search_space"));
        let h = c.header("b", "grid", None);
        assert_eq!((h.direction, h.n_jobs, h.metric.as_str()), (Direction::Maximize, 1, "value"));
    }

    #[test]
    fn zero_max_trials() {
        let doc = BOSTON.replace("max_trials: 162", "max_trials: 0");
        assert!(matches!(
            parse_config(&doc),
            Err(ConfigError::BadMaxTrials { path, .. }) if path == "[1].content.max_trials"
        ));
        let doc = BOSTON.replace("max_trials: 162", "max_trials: $maxTrials");
        assert!(matches!(parse_config(&doc), Err(ConfigError::BadMaxTrials { .. })));
    }

    #[test]
    fn empty_dimension() {
        let doc = BOSTON.replace("min-samples-leaf: [1, 2, 5]", "min-samples-leaf: []");
        assert_eq!(
            parse_config(&doc),
            Err(ConfigError::EmptySearchSpace {
                path: "[0].content.search_space.min-samples-leaf".into()
            })
        );
    }

    #[test]
    fn roles_must_match() {
        let doc = BOSTON.replace("role: user", "role: assistant");
        assert!(matches!(parse_config(&doc), Err(ConfigError::MalformedDocument { .. })));
    }

    #[test]
    fn seeds_extras_and_alternate_spelling() {
        let doc = BOSTON
            .replace("instrustion:", "instruction:")
            .replace("    link:", "    venue: ICML\n    link:")
            .replace(
                "trials: []",
                "trials:\n      - {n-estimators: 300, max-depth: None, min-samples-split: 2, min-samples-leaf: 1, max-features: sqrt}\n    direction: minimize\n    metric: mse\n    owner: lab",
            );
        let c = parse_config(&doc).unwrap();
        assert_eq!(c.instruction, "Complete instructions under limited trials.");
        assert_eq!(c.seed_numbers(), vec![108]);
        assert_eq!(c.direction, Some(Direction::Minimize));
        assert_eq!(c.metric.as_deref(), Some("mse"));
        assert_eq!(c.extra_system.get("venue").and_then(Value::as_str), Some("ICML"));
        assert_eq!(c.extra_user.get("owner").and_then(Value::as_str), Some("lab"));
        assert_eq!(parse_config(&c.emit()).unwrap(), c);
    }

    #[test]
    fn bad_seed_is_rejected() {
        let doc = BOSTON.replace("trials: []", "trials:\n      - {n-estimators: 999}");
        assert!(matches!(parse_config(&doc), Err(ConfigError::MalformedDocument { .. })));
    }

    #[test]
    fn prompt_embeds_summary_and_keeps_placeholders() {
        let p = render_config_prompt("tune random forest on Boston").unwrap();
        assert!(p.starts_with("tune random forest on Boston\n\nPlease fill out the content following the YAML format:\n\n# Template for Configuration Interaction \n"));
        assert!(p.contains("max_trials: $maxTrials"));
        assert!(p.contains("$hyper_name1: []"));
        assert_eq!(render_config_prompt("  \n"), Err(ConfigError::EmptySummary));
    }

    #[test]
    fn fenced_reply_parses() {
        let fenced = format!("Here you go:\n```yaml\n{BOSTON}```\nGood luck.");
        assert_eq!(parse_config(&fenced).unwrap(), parse_config(BOSTON).unwrap());
    }

    #[test]
    fn draft_through_scripted_model() {
        let t = ScriptedTransport::new(vec![PlaybookEntry {
            expect_phase: Phase::ConfigDraft,
            response_text: format!("```yaml\n{BOSTON}```"),
        }]);
        let mut client = ChatClient::new(Box::new(t));
        let (raw, c) = draft_config("tune random forest on Boston", &mut client, "m").unwrap();
        assert!(raw.contains("n-estimators"));
        assert_eq!(c.search_space.cardinality(), 162);
    }

    fn arb_scalar() -> impl Strategy<Value = Scalar> {
        prop_oneof![
            (-1000i64..1000).prop_map(Scalar::Int),
            (-1.0e6f64..1.0e6).prop_map(Scalar::Float),
            "[a-z][a-z_]{0,6}".prop_map(Scalar::Str),
            Just(Scalar::Str("None".into())),
        ]
    }

    fn arb_config() -> impl Strategy<Value = StudyConfig> {
        let dims = prop::collection::vec(prop::collection::vec(arb_scalar(), 1..4), 1..4);
        (dims, 1usize..500, "[A-Za-z ]{0,20}", any::<bool>()).prop_map(|(dims, max_trials, text, minimize)| {
            let dims = dims
                .into_iter()
                .enumerate()
                .map(|(i, mut vals)| {
                    let mut seen = Vec::new();
                    vals.retain(|v| {
                        let fresh = !seen.contains(v);
                        seen.push(v.clone());
                        fresh
                    });
                    Dimension::new(format!("h{i}"), vals)
                })
                .collect();
            let space = SearchSpace::new(dims).unwrap();
            let seed = space.config_at(space.cardinality() - 1).unwrap();
            StudyConfig {
                model: "m".into(),
                description: text.clone(),
                task: text.trim().to_string(),
                basic_idea: String::new(),
                search_space: space,
                link: "l".into(),
                instruction: "Complete instructions under limited trials.".into(),
                max_trials,
                trials: vec![seed],
                direction: minimize.then_some(Direction::Minimize),
                metric: None,
                n_jobs: Some(2),
                extra_system: Mapping::new(),
                extra_user: Mapping::new(),
            }
        })
    }

    proptest! {
        #[test]
        fn parse_after_emit_is_identity(c in arb_config()) {
            let back = parse_config(&c.emit()).unwrap();
            prop_assert_eq!(back, c);
        }

        #[test]
        fn cardinality_is_the_product_of_list_lengths(c in arb_config()) {
            let product: usize = c.search_space.dimensions().iter().map(|d| d.values.len()).product();
            prop_assert_eq!(parse_config(&c.emit()).unwrap().search_space.cardinality(), product);
        }
    }
}
