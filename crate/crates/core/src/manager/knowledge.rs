//! The trial listing the agent reads: one line per trial, ordinal order,
//! permanently failed trials last with their reason.

use crate::model::{format_config, Study, TrialStatus};

/// `#<number> {dim=value, ...} -> <metric>=<value>` per completed trial,
/// then `#<number> {...} -> FAILED (<reason>)` per given-up trial.
pub fn knowledge_base_view(study: &Study) -> String {
    let mut lines: Vec<String> = study
        .completed()
        .iter()
        .map(|t| {
            format!(
                "#{} {} -> {}={}",
                t.number,
                format_config(&t.config),
                study.metric,
                t.value.expect("completed")
            )
        })
        .collect();
    let mut failed: Vec<_> = study
        .trials
        .iter()
        .filter(|t| t.status == TrialStatus::Failed)
        .collect();
    failed.sort_by_key(|t| (t.ended_at, t.number));
    lines.extend(failed.iter().map(|t| {
        format!(
            "#{} {} -> FAILED ({})",
            t.number,
            format_config(&t.config),
            t.failure.as_deref().unwrap_or("unknown")
        )
    }));
    lines.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Direction;
    use crate::solvers::testing::{grid_study, record};

    #[test]
    fn empty_study_has_empty_listing() {
        assert_eq!(knowledge_base_view(&grid_study(&[3], Direction::Maximize)), "");
    }

    #[test]
    fn ordinal_order_and_failures() {
        let mut s = grid_study(&[2, 2], Direction::Maximize);
        record(&mut s, 3, 0.5);
        record(&mut s, 0, 0.25);
        record(&mut s, 1, 1.0);
        s.submit(2, "t", 0).unwrap();
        s.start(2, 0, 0).unwrap();
        s.fail(2, "exit status 1", true, 5).unwrap();
        let text = knowledge_base_view(&s);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines,
            vec![
                "#3 {a=1, b=1} -> value=0.5",
                "#0 {a=0, b=0} -> value=0.25",
                "#1 {a=0, b=1} -> value=1",
                "#2 {a=1, b=0} -> FAILED (exit status 1)",
            ]
        );
    }
}
