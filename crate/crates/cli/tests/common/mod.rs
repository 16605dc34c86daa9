#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use selfai_core::manager::{Table, TableMeta};
use selfai_core::{space_from, Direction, Scalar};

/// `a` in 0..4, `b` in 0..2; values rise with both, best at (3, 1).
pub fn table_8(dir: &Path) -> PathBuf {
    let space = space_from(&[
        ("a", (0..4).map(Scalar::Int).collect()),
        ("b", (0..2).map(Scalar::Int).collect()),
    ])
    .unwrap();
    let values = (0..8).map(|n| 1.0 + n as f64).collect();
    let t = Table::new(
        TableMeta {
            name: "eight".into(),
            direction: Direction::Maximize,
            metric: "score".into(),
            count: 8,
        },
        space,
        values,
    )
    .unwrap();
    t.write(dir).unwrap()
}

pub fn table_4(dir: &Path) -> PathBuf {
    let space = space_from(&[
        ("a", vec![Scalar::Int(0), Scalar::Int(1)]),
        ("b", vec![Scalar::Int(0), Scalar::Int(1)]),
    ])
    .unwrap();
    let t = Table::new(
        TableMeta {
            name: "four".into(),
            direction: Direction::Maximize,
            metric: "score".into(),
            count: 4,
        },
        space,
        vec![0.5, 0.75, 1.0, 0.25],
    )
    .unwrap();
    t.write(dir).unwrap()
}

pub fn config(dir: &Path, dims: &[(&str, &str)], max_trials: usize, n_jobs: usize) -> PathBuf {
    let space: String = dims.iter().map(|(n, v)| format!("      {n}: {v}\n")).collect();
    let doc = format!(
        "- role: system
  content:
    model: test
    description: test study
    task: toy
    basic_idea: toy
    search_space:
{space}    link: None
    instrustion: Find the best value.
- role: user
  content:
    max_trials: {max_trials}
    trials: []
    direction: maximize
    metric: score
    n_jobs: {n_jobs}
"
    );
    let path = dir.join("study.yaml");
    fs::write(&path, doc).unwrap();
    path
}

pub fn config_8(dir: &Path, n_jobs: usize) -> PathBuf {
    config(dir, &[("a", "[0, 1, 2, 3]"), ("b", "[0, 1]")], 8, n_jobs)
}

pub fn config_4(dir: &Path) -> PathBuf {
    config(dir, &[("a", "[0, 1]"), ("b", "[0, 1]")], 4, 1)
}

fn entry(phase: &str, text: &str) -> serde_json::Value {
    serde_json::json!({ "expect_phase": phase, "response_text": text })
}

pub fn round_no(recs: &[(i64, i64)]) -> Vec<serde_json::Value> {
    let lines: String = recs
        .iter()
        .enumerate()
        .map(|(i, (a, b))| format!("trial {}: a={a}, b={b}\n", i + 1))
        .collect();
    vec![
        entry("analysis", "Values grow with a."),
        entry("stop_judgement", "Answer: No with confidence score: 0.9"),
        entry("planning", &format!("RECOMMENDATIONS:\n{lines}")),
    ]
}

pub fn round_yes() -> Vec<serde_json::Value> {
    vec![
        entry("analysis", "The best region has been covered."),
        entry("stop_judgement", "Answer: Yes, with confidence score: 0.95"),
    ]
}

pub fn write_playbook(dir: &Path, name: &str, entries: Vec<serde_json::Value>) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(&entries).unwrap()).unwrap();
    path
}
