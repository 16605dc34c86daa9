//! Prompt templates and their rendering.
//!
//! Templates are reproduced word for word; only the `{name}` placeholders are
//! substituted, in a single pass, so values that happen to contain braces are
//! never re-expanded.

use serde::{Deserialize, Serialize};

use super::{AgentError, Phase};
use crate::manager::knowledge_base_view;
use crate::model::{format_config, SearchSpace, Study};

pub const ANALYSIS_TEMPLATE: &str = "Completed trials:

{completed_trials}

Task 1: Analyze the current task

Understand current tasks, basic ideas, objectives, and hyperparameters.

Task 2: Analysis of Completed Trials

Step 1: Summarize performance metrics for completed trials.

Step 2: Evaluate performance trends for hyperparameters.

Step 3: Highlight promising hyperparameter combinations.";

pub const STOP_TEMPLATE: &str = "Completed trials:

{completed_trials}

The following **Search Space** contains **unexplored** trials.
{trials}

Instructions:
Task 1: Review Analysis of Completed Trials (trial analysis, performance trends, highlights, and other insights)

Task 2: Decide Whether to Stop Optimization

Based on the above analysis and **Completed Trials**, determine whether the optimization process should be stopped.

Carefully analyze each of the following stop rules and provide a short (1-2 sentences) justification for whether it is met:

1. Have all promising configurations identified based on performance trends been tested?

2. Is it unlikely that unexplored configurations will perform better based on the observed trends and the law of diminishing returns?

3. Has the best metric improved significantly?

Step 2: Decide whether **all** conditions are met.

If **all** criteria in Step 1 are met, Answer: Yes, with confidence score: {confidence_score}. Otherwise, Answer: No with confidence score: {confidence_score}.";

const RULES: &str = "**Rules:**

1. \"params\" MUST include:

  {HyperName}

2. All selected `params` must match exactly with the provided **Search Space**. Do NOT leave out any key.

3. Use the analysis in **Task 1** (trial analysis, performance trends, highlights, and other insights) to guide selection.

4. Based on the above analysis, explore under-explored regions only when there is clear evidence of potential performance gain.

5. Do not mix, modify, or create new values.

6. You MUST not output any JSON blocks in this part.

7. You MUST provide reasoning for each recommendation.";

pub fn plan_template() -> String {
    format!(
        "Instructions:

Task 1: Review Analysis of All Completed Trials

Completed trials:

{{completed_trials}}

The following **Search Space** contains **unexplored** trials:

{{trials}}

Instructions:

Task 2: Optimization Recommendation

Recommend exactly {{n_jobs}} promising trials from the provided **Search Space** (include both number and params).

{RULES}"
    )
}

pub fn baseline_search_template() -> String {
    format!(
        "Completed trials:
{{completed_trials}}

Instructions:

**Search Space** (Numbering starts from 0, excluding Completed Trials):
{{trials}}

Task 1: Optimization Recommendation
Recommend exactly {{n_jobs}} promising trials from the provided **Search Space** (include both number and params).

{RULES}"
    )
}

pub const BASELINE_STOP_TEMPLATE: &str = "Completed trials:
{completed_trials}

The following **Search Space** contains **unexplored** trials.
{trials}

If the optimization process should be stopped, Answer: Yes with confidence score: {confidence_score}. Otherwise, Answer: No with confidence score: {confidence_score}.

Finally, you MUST output 'Answer: No/Yes' with confidence score: {confidence_score}.";

/// Appended to every prompt that asks for recommendations, so the answer
/// ends in something a parser can rely on.
pub const OUTPUT_CONTRACT: &str = "Output format: after your reasoning, end the answer with a block in exactly this form, one line per recommended trial, writing every value exactly as it appears in the Search Space:
RECOMMENDATIONS:
trial <number>: <name>=<value>, <name>=<value>, ...";

/// What the model is asked to put where the template expects a confidence.
pub const CONFIDENCE_SLOT: &str = "<value between 0 and 1>";

pub const PLACEHOLDERS: [&str; 5] = [
    "{completed_trials}",
    "{trials}",
    "{n_jobs}",
    "{HyperName}",
    "{confidence_score}",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub phase: Phase,
    pub system_text: String,
    pub user_text: String,
}

/// Single-pass `{key}` substitution. Unknown `{...}` sequences are copied as is.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let key = &after[..close];
            values
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, v)) => {
                out.push_str(v);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// `#<number> {dim=value, ...}` per config. Past `cap` entries an evenly
/// strided sample of `cap` is listed, followed by `...and N more`.
pub fn unexplored_listing(space: &SearchSpace, unexplored: &[usize], cap: usize) -> String {
    let line = |n: usize| format!("#{n} {}", format_config(&space.config_at(n).expect("in range")));
    if unexplored.len() <= cap {
        return unexplored.iter().map(|&n| line(n)).collect::<Vec<_>>().join("\n");
    }
    let mut lines: Vec<String> = (0..cap)
        .map(|i| line(unexplored[i * unexplored.len() / cap]))
        .collect();
    lines.push(format!("\u{2026}and {} more", unexplored.len() - cap));
    lines.join("\n")
}

pub fn hyper_names(space: &SearchSpace) -> String {
    space.names().collect::<Vec<_>>().join(", ")
}

/// Rough token count (four characters per token).
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Inputs shared by all renderers for one round.
pub struct PromptInputs<'a> {
    pub study: &'a Study,
    pub unexplored: &'a [usize],
    pub n_jobs: usize,
    pub cap: usize,
}

impl PromptInputs<'_> {
    fn completed(&self) -> String {
        knowledge_base_view(self.study)
    }

    fn trials(&self) -> String {
        unexplored_listing(&self.study.space, self.unexplored, self.cap)
    }

    fn bundle(&self, phase: Phase, user_text: String) -> PromptBundle {
        PromptBundle {
            phase,
            system_text: self.study.system_context.clone(),
            user_text,
        }
    }

    pub fn analysis(&self) -> PromptBundle {
        let text = fill(ANALYSIS_TEMPLATE, &[("completed_trials", &self.completed())]);
        self.bundle(Phase::Analysis, text)
    }

    pub fn stop(&self) -> PromptBundle {
        let text = fill(
            STOP_TEMPLATE,
            &[
                ("completed_trials", &self.completed()),
                ("trials", &self.trials()),
                ("confidence_score", CONFIDENCE_SLOT),
            ],
        );
        self.bundle(Phase::StopJudgement, text)
    }

    pub fn plan(&self) -> PromptBundle {
        let text = self.recommendation_prompt(&plan_template());
        self.bundle(Phase::Planning, text)
    }

    pub fn baseline_search(&self) -> PromptBundle {
        let text = self.recommendation_prompt(&baseline_search_template());
        self.bundle(Phase::BaselineSearch, text)
    }

    pub fn baseline_stop(&self) -> PromptBundle {
        let text = fill(
            BASELINE_STOP_TEMPLATE,
            &[
                ("completed_trials", &self.completed()),
                ("trials", &self.trials()),
                ("confidence_score", CONFIDENCE_SLOT),
            ],
        );
        self.bundle(Phase::BaselineStop, text)
    }

    fn recommendation_prompt(&self, template: &str) -> String {
        let body = fill(
            template,
            &[
                ("completed_trials", &self.completed()),
                ("trials", &self.trials()),
                ("n_jobs", &self.n_jobs.to_string()),
                ("HyperName", &hyper_names(&self.study.space)),
            ],
        );
        format!("{body}\n\n{OUTPUT_CONTRACT}")
    }
}

/// Fails when the conversation so far plus `bundle` would not fit.
pub fn check_budget(history_chars: usize, bundle: &PromptBundle, limit: usize) -> Result<(), AgentError> {
    let estimated = history_chars.div_ceil(4) + estimate_tokens(&bundle.user_text);
    if estimated > limit {
        return Err(AgentError::ContextBudgetExceeded { estimated, limit });
    }
    Ok(())
}
