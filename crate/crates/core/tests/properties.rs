use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use proptest::prelude::*;

use selfai_core::agent::{AgentConfig, ChatClient, CognitiveAgent, Phase, PlaybookEntry, ScriptedTransport};
use selfai_core::clock::StepClock;
use selfai_core::manager::events::replay;
use selfai_core::manager::{
    simulate, EventPayload, EventWriter, Orchestrator, RunOutcome, Simulation, TabulatedBackend,
};
use selfai_core::model::{Lifecycle, LifecycleEvent, SearchSpace, Study, StudyHeader};
use selfai_core::solvers::{classical, Solver, SolverContext, SolverKind, TpeSolver};
use selfai_core::synthetic::random_table;

fn kind_strategy() -> impl Strategy<Value = SolverKind> {
    prop_oneof![
        Just(SolverKind::Grid),
        Just(SolverKind::Random),
        Just(SolverKind::Tpe)
    ]
}

fn started_study(space: &SearchSpace) -> Study {
    let mut s = Study::new(StudyHeader {
        id: "prop".into(),
        space: space.clone(),
        direction: selfai_core::Direction::Maximize,
        max_trials: space.cardinality(),
        n_jobs: 1,
        solver: "prop".into(),
        system_context: String::new(),
        metric: "value".into(),
    })
    .unwrap();
    s.transition(&LifecycleEvent::Start).unwrap();
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solvers_never_repeat(table_seed in 0u64..10_000, seed in any::<u64>(), kind in kind_strategy(), n_jobs in 1usize..5) {
        let table = Arc::new(random_table(table_seed, 48));
        let mut sim = Simulation::new(&table, kind, seed);
        sim.n_jobs = n_jobs;
        sim.slots = n_jobs;
        let run = simulate(&table, &sim, classical(kind).unwrap()).unwrap();
        let numbers: Vec<usize> = run.study.trials.iter().map(|t| t.number).collect();
        let distinct: BTreeSet<usize> = numbers.iter().copied().collect();
        prop_assert_eq!(distinct.len(), numbers.len());
        prop_assert!(numbers.iter().all(|&n| n < table.space.cardinality()));
        prop_assert_eq!(run.outcome, RunOutcome::Finished(Lifecycle::Exhausted));
    }

    #[test]
    fn tpe_is_deterministic(table_seed in 0u64..10_000, seed in any::<u64>()) {
        let table = Arc::new(random_table(table_seed, 64));
        let sim = Simulation::new(&table, SolverKind::Tpe, seed);
        let a = simulate(&table, &sim, Box::new(TpeSolver::default())).unwrap();
        let b = simulate(&table, &sim, Box::new(TpeSolver::default())).unwrap();
        prop_assert_eq!(a.log, b.log);
    }

    #[test]
    fn log_is_dense_and_ordinals_have_no_gaps(
        table_seed in 0u64..10_000,
        seed in any::<u64>(),
        kind in kind_strategy(),
        n_jobs in 1usize..5,
        slots in 1usize..4,
        budget in 1usize..30,
    ) {
        let table = Arc::new(random_table(table_seed, 32));
        let mut sim = Simulation::new(&table, kind, seed);
        sim.n_jobs = n_jobs;
        sim.slots = slots;
        sim.max_trials = Some(budget.min(table.space.cardinality()));
        let run = simulate(&table, &sim, classical(kind).unwrap()).unwrap();
        let replayed = replay(&run.log).unwrap();
        prop_assert_eq!(&replayed.study, &run.study);
        let seqs: Vec<u64> = replayed.records.iter().map(|r| r.seq).collect();
        prop_assert_eq!(seqs, (1..=replayed.records.len() as u64).collect::<Vec<_>>());
        let mut ords: Vec<usize> = run.study.trials.iter().filter_map(|t| t.ordinal).collect();
        ords.sort_unstable();
        prop_assert_eq!(ords, (1..=run.study.completed_count()).collect::<Vec<_>>());
        let mut live = 0usize;
        for r in &replayed.records {
            match r.payload {
                EventPayload::TrialStarted { .. } => live += 1,
                EventPayload::TrialCompleted { .. } | EventPayload::TrialFailed { .. } => live -= 1,
                _ => {}
            }
            prop_assert!(live <= slots);
        }
    }

    /// Recommendation answers naming explored, duplicate, out-of-range or
    /// malformed configs never turn into an invalid suggestion.
    #[test]
    fn agent_suggestions_are_fresh_and_valid(
        table_seed in 0u64..10_000,
        explored in 0usize..6,
        answers in prop::collection::vec(prop::collection::vec((0usize..80, 0i64..12, 0i64..12, any::<bool>()), 0..5), 3),
    ) {
        let table = random_table(table_seed, 64);
        let space = &table.space;
        let mut study = started_study(space);
        for n in 0..explored.min(space.cardinality() - 1) {
            study.submit(n, "seed", 0).unwrap();
            study.start(n, 0, 0).unwrap();
            study.complete(n, table.value_at(n).unwrap(), 0).unwrap();
        }
        let names: Vec<&str> = space.names().collect();
        let planning: Vec<PlaybookEntry> = answers
            .iter()
            .map(|lines| {
                let body: String = lines
                    .iter()
                    .map(|&(n, x, y, numbered)| {
                        let assignment = names
                            .iter()
                            .zip([x, y, x + y])
                            .map(|(d, v)| format!("{d}={v}"))
                            .collect::<Vec<_>>()
                            .join(", ");
                        if numbered {
                            format!("trial {n}: {assignment}\n")
                        } else {
                            format!("{n}. {assignment}\n")
                        }
                    })
                    .collect();
                PlaybookEntry {
                    expect_phase: Phase::Planning,
                    response_text: format!("RECOMMENDATIONS:\n{body}"),
                }
            })
            .collect();
        let mut entries = vec![
            PlaybookEntry { expect_phase: Phase::Analysis, response_text: "analysis".into() },
            PlaybookEntry {
                expect_phase: Phase::StopJudgement,
                response_text: "Answer: No with confidence score: 0.9".into(),
            },
        ];
        entries.extend(planning);
        let mut agent = CognitiveAgent::new(
            AgentConfig::default(),
            ChatClient::new(Box::new(ScriptedTransport::new(entries))),
        );
        let clock = StepClock::new(0, 1);
        let ctx = SolverContext { study: &study, requested: 3, seed: 5, clock: &clock };
        if let Ok(decision) = agent.decide(&ctx, &mut Vec::new()) {
            let seen = study.explored();
            let mut batch = BTreeSet::new();
            for p in decision.suggestions() {
                prop_assert_eq!(space.config_at(p.number), Some(p.config.clone()));
                prop_assert!(!seen.contains(&p.number));
                prop_assert!(batch.insert(p.number));
            }
            prop_assert!(decision.suggestions().len() <= 3);
        }
    }
}

#[test]
fn slot_bound_holds_with_threaded_trials() {
    for (seed, slots) in [(1u64, 1usize), (2, 2), (3, 3)] {
        let table = Arc::new(random_table(seed, 24));
        let mut sim = Simulation::new(&table, SolverKind::Random, seed);
        sim.n_jobs = 4;
        sim.slots = slots;
        let backend = Arc::new(TabulatedBackend::new(Arc::clone(&table), Duration::from_millis(2)));
        let mut orch = Orchestrator::create(
            sim.header(&table),
            sim.run_spec(),
            EventWriter::new(Vec::new(), 1),
            classical(SolverKind::Random).unwrap(),
            backend,
            Arc::new(StepClock::new(0, 1)),
        )
        .unwrap();
        orch.run().unwrap();
        let log = orch.into_writer();
        let mut live = 0usize;
        for r in replay(&log).unwrap().records {
            match r.payload {
                EventPayload::TrialStarted { .. } => live += 1,
                EventPayload::TrialCompleted { .. } | EventPayload::TrialFailed { .. } => live -= 1,
                _ => {}
            }
            assert!(live <= slots, "{live} running with {slots} slots");
        }
    }
}

#[test]
fn solver_trait_objects_share_the_interface() {
    let names: Vec<String> = [SolverKind::Grid, SolverKind::Random, SolverKind::Tpe]
        .into_iter()
        .map(|k| {
            let s: Box<dyn Solver> = classical(k).unwrap();
            s.name().to_string()
        })
        .collect();
    assert_eq!(names, ["grid", "random", "tpe"]);
}
