//! The study loop: consult the solver, dispatch trials into slots, record
//! every change as an event.
//!
//! Rounds are barriers. The solver is consulted only when no trial is pending
//! or running, and is asked for at most
//! `min(n_jobs, max_trials - completed, unexplored)` configs. Every state
//! change goes through [`Orchestrator::emit`], which folds the event into the
//! in-memory study with [`apply`] and then appends it to the log.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::time::Duration;

use super::backend::{retry_policy, Backend, RetryDecision, TrialError, TrialJob};
use super::control::ControlSource;
use super::events::{apply, EventPayload, EventRecord, EventWriter, FoldError, Replayed, RunSpec};
use crate::clock::Clock;
use crate::model::{
    Lifecycle, LifecycleEvent, SolverDecision, Study, StudyHeader, Suggestion, TrialStatus,
};
use crate::solvers::{Solver, SolverContext, SolverError};

#[derive(Debug, Clone)]
pub struct OrchestratorOptions {
    /// Attempts per trial before a transient failure becomes permanent.
    pub max_attempts: u32,
    /// How long to wait for a result or a command before looking again.
    pub poll: Duration,
    /// Consecutive empty suggestions tolerated before giving up.
    pub max_empty_rounds: u32,
}

impl Default for OrchestratorOptions {
    fn default() -> Self {
        Self {
            max_attempts: 2,
            poll: Duration::from_millis(50),
            max_empty_rounds: 3,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("event log: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Fold(#[from] FoldError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("solver `{solver}` made an invalid decision: {reason}")]
    InvalidDecision { solver: String, reason: String },
    #[error("solver `{0}` suggested nothing {1} rounds in a row")]
    Stalled(String, u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    /// Stopped or exhausted.
    Finished(Lifecycle),
    /// Paused or waiting for stop approval with no one to ask.
    Suspended(Lifecycle),
}

type TrialResult = (TrialJob, usize, Result<f64, TrialError>);

pub struct Orchestrator<W: Write> {
    study: Study,
    run: RunSpec,
    solver: Box<dyn Solver>,
    backend: Arc<dyn Backend>,
    writer: EventWriter<W>,
    clock: Arc<dyn Clock>,
    control: Option<Box<dyn ControlSource>>,
    observer: Option<Box<dyn FnMut(&EventRecord) + Send>>,
    options: OrchestratorOptions,
    /// Running trial number to worker slot.
    running: BTreeMap<usize, usize>,
    /// Started jobs of an instant backend, executed inline in this order.
    inline: Vec<(TrialJob, usize)>,
    tx: Sender<TrialResult>,
    rx: Receiver<TrialResult>,
    empty_rounds: u32,
}

impl<W: Write> Orchestrator<W> {
    /// Starts a new study; the first record written is `study_created`.
    pub fn create(
        header: StudyHeader,
        run: RunSpec,
        writer: EventWriter<W>,
        solver: Box<dyn Solver>,
        backend: Arc<dyn Backend>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, OrchestratorError> {
        let study = Study::new(header.clone()).map_err(FoldError::from)?;
        let mut orch = Self::assemble(study, run.clone(), writer, solver, backend, clock);
        let rec = orch
            .writer
            .stamp(orch.clock.now_ms(), EventPayload::StudyCreated { header, run });
        orch.writer.append(&rec)?;
        if let Some(f) = orch.observer.as_mut() {
            f(&rec);
        }
        Ok(orch)
    }

    /// Continues a replayed study.
    pub fn resume(
        replayed: Replayed,
        writer: EventWriter<W>,
        solver: Box<dyn Solver>,
        backend: Arc<dyn Backend>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Self::assemble(replayed.study, replayed.run, writer, solver, backend, clock)
    }

    fn assemble(
        study: Study,
        run: RunSpec,
        writer: EventWriter<W>,
        solver: Box<dyn Solver>,
        backend: Arc<dyn Backend>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        let (tx, rx) = channel();
        Self {
            study,
            run,
            solver,
            backend,
            writer,
            clock,
            control: None,
            observer: None,
            options: OrchestratorOptions::default(),
            running: BTreeMap::new(),
            inline: Vec::new(),
            tx,
            rx,
            empty_rounds: 0,
        }
    }

    pub fn with_control(mut self, control: Box<dyn ControlSource>) -> Self {
        self.control = Some(control);
        self
    }

    pub fn with_observer(mut self, f: impl FnMut(&EventRecord) + Send + 'static) -> Self {
        self.observer = Some(Box::new(f));
        self
    }

    pub fn with_options(mut self, options: OrchestratorOptions) -> Self {
        self.options = options;
        self
    }

    pub fn study(&self) -> &Study {
        &self.study
    }

    pub fn run_spec(&self) -> &RunSpec {
        &self.run
    }

    pub fn into_writer(self) -> W {
        self.writer.into_inner()
    }

    /// Folds `payload` into the study, then writes it.
    fn emit(&mut self, payload: EventPayload) -> Result<(), OrchestratorError> {
        let rec = self.writer.stamp(self.clock.now_ms(), payload);
        apply(&mut self.study, &rec)?;
        self.writer.append(&rec)?;
        if let Some(f) = self.observer.as_mut() {
            f(&rec);
        }
        Ok(())
    }

    fn transition(&mut self, event: LifecycleEvent, cause: &str) -> Result<(), OrchestratorError> {
        let from = self.study.lifecycle;
        let mut probe = self.study.clone();
        probe.transition(&event).map_err(FoldError::from)?;
        self.emit(EventPayload::LifecycleChanged {
            event,
            from,
            to: probe.lifecycle,
            cause: cause.to_string(),
        })
    }

    /// Drives the study until it ends or can make no progress on its own.
    pub fn run(&mut self) -> Result<RunOutcome, OrchestratorError> {
        if self.study.lifecycle == Lifecycle::Created {
            self.transition(LifecycleEvent::Start, "run")?;
        }
        loop {
            self.drain_control()?;
            let lifecycle = self.study.lifecycle;
            if lifecycle.is_terminal() {
                if self.running.is_empty() {
                    return Ok(RunOutcome::Finished(lifecycle));
                }
                self.collect()?;
                continue;
            }
            if lifecycle == Lifecycle::Running {
                self.dispatch()?;
            }
            if !self.running.is_empty() {
                self.collect()?;
                continue;
            }
            if lifecycle != Lifecycle::Running {
                if self.control.is_none() {
                    return Ok(RunOutcome::Suspended(lifecycle));
                }
                std::thread::sleep(self.options.poll);
                continue;
            }
            self.advance()?;
        }
    }

    /// One step with nothing in flight: end the study, finish the last
    /// decision, or ask the solver for a new one.
    fn advance(&mut self) -> Result<(), OrchestratorError> {
        let completed = self.study.completed_count();
        if completed >= self.study.max_trials {
            return self.transition(LifecycleEvent::Exhaust, "budget");
        }
        let unexplored = self.study.unexplored();
        if unexplored.is_empty() {
            return self.transition(LifecycleEvent::Exhaust, "space");
        }
        if let Some(decision) = self.study.outstanding.clone() {
            return self.carry_out(decision);
        }
        let round = self.study.round + 1;
        if self.study.round == 0 && !self.run.initial.is_empty() {
            let decision = self.seed_decision();
            self.emit(EventPayload::SolverDecisionRecorded { round, decision })?;
            return self.carry_on();
        }
        let requested = self
            .study
            .n_jobs
            .min(self.study.max_trials - completed)
            .min(unexplored.len());
        let mut trace = Vec::new();
        let result = {
            let ctx = SolverContext {
                study: &self.study,
                requested,
                seed: self.run.seed,
                clock: &*self.clock,
            };
            self.solver.decide(&ctx, &mut trace)
        };
        for record in trace {
            self.emit(EventPayload::ReasoningRecorded { record })?;
        }
        let decision = self.validate(result?, requested)?;
        if decision.suggestions().is_empty() && !decision.is_stop() {
            self.empty_rounds += 1;
            if self.empty_rounds >= self.options.max_empty_rounds {
                return Err(OrchestratorError::Stalled(
                    self.solver.name().to_string(),
                    self.empty_rounds,
                ));
            }
        } else {
            self.empty_rounds = 0;
        }
        self.emit(EventPayload::SolverDecisionRecorded { round, decision })?;
        self.carry_on()
    }

    fn carry_on(&mut self) -> Result<(), OrchestratorError> {
        match self.study.outstanding.clone() {
            Some(d) => self.carry_out(d),
            None => Ok(()),
        }
    }

    fn carry_out(&mut self, decision: SolverDecision) -> Result<(), OrchestratorError> {
        match decision {
            SolverDecision::Suggest {
                suggestions,
                origin,
                ..
            } => {
                for s in suggestions {
                    self.emit(EventPayload::TrialSubmitted {
                        number: s.number,
                        origin: origin.clone(),
                    })?;
                }
                Ok(())
            }
            SolverDecision::Stop {
                confidence,
                rationale,
            } => {
                if self.run.supervised {
                    self.transition(
                        LifecycleEvent::RequestStop {
                            confidence,
                            rationale,
                        },
                        "solver",
                    )
                } else {
                    self.transition(LifecycleEvent::Stop, "solver")
                }
            }
        }
    }

    fn seed_decision(&self) -> SolverDecision {
        let explored = self.study.explored();
        let mut picked: Vec<usize> = Vec::new();
        for &n in &self.run.initial {
            if n < self.study.space.cardinality() && !explored.contains(&n) && !picked.contains(&n) {
                picked.push(n);
            }
        }
        picked.truncate(self.study.max_trials);
        let suggestions = picked
            .into_iter()
            .map(|n| Suggestion {
                number: n,
                config: self.study.space.config_at(n).expect("in range"),
            })
            .collect();
        SolverDecision::suggest(suggestions, "seed")
    }

    fn validate(
        &self,
        decision: SolverDecision,
        requested: usize,
    ) -> Result<SolverDecision, OrchestratorError> {
        let invalid = |reason: String| OrchestratorError::InvalidDecision {
            solver: self.solver.name().to_string(),
            reason,
        };
        let SolverDecision::Suggest {
            mut suggestions,
            rationale,
            origin,
        } = decision
        else {
            return Ok(decision);
        };
        let explored = self.study.explored();
        let mut seen = std::collections::BTreeSet::new();
        for s in &suggestions {
            match self.study.space.config_at(s.number) {
                Some(c) if c == s.config => {}
                Some(_) => return Err(invalid(format!("config of #{} does not match its number", s.number))),
                None => return Err(invalid(format!("#{} is outside the space", s.number))),
            }
            if explored.contains(&s.number) {
                return Err(invalid(format!("#{} was already explored", s.number)));
            }
            if !seen.insert(s.number) {
                return Err(invalid(format!("#{} suggested twice", s.number)));
            }
        }
        if suggestions.len() > requested {
            log::warn!(
                "solver `{}` suggested {} configs, {} requested; keeping the first {requested}",
                self.solver.name(),
                suggestions.len(),
                requested
            );
            suggestions.truncate(requested);
        }
        Ok(SolverDecision::Suggest {
            suggestions,
            rationale,
            origin,
        })
    }

    fn drain_control(&mut self) -> Result<(), OrchestratorError> {
        let Some(control) = self.control.as_mut() else {
            return Ok(());
        };
        for command in control.poll() {
            if let Err(e) = command.check(&self.study) {
                log::warn!("ignoring control command {command:?}: {e}");
                continue;
            }
            for event in command.events() {
                self.transition(event, "control")?;
            }
        }
        Ok(())
    }

    fn free_worker(&self) -> Option<usize> {
        (0..self.run.slots.max(1)).find(|w| !self.running.values().any(|v| v == w))
    }

    fn dispatch(&mut self) -> Result<(), OrchestratorError> {
        for number in self.study.pending() {
            let Some(worker) = self.free_worker() else {
                break;
            };
            let trial = self.study.trial(number).expect("pending trial exists");
            let job = TrialJob {
                number,
                config: trial.config.clone(),
                attempt: trial.attempts + 1,
            };
            self.emit(EventPayload::TrialStarted {
                number,
                worker,
                attempt: job.attempt,
            })?;
            self.running.insert(number, worker);
            if self.backend.is_instant() {
                self.inline.push((job, worker));
            } else {
                let backend = Arc::clone(&self.backend);
                let tx = self.tx.clone();
                std::thread::spawn(move || {
                    let result = catch_unwind(AssertUnwindSafe(|| backend.run(&job)))
                        .unwrap_or_else(|_| Err(TrialError::Launch("backend panicked".into())));
                    let _ = tx.send((job, worker, result));
                });
            }
        }
        Ok(())
    }

    /// Records at least one finished trial, or returns after a poll interval.
    fn collect(&mut self) -> Result<(), OrchestratorError> {
        if !self.inline.is_empty() {
            for (job, worker) in std::mem::take(&mut self.inline) {
                let result = self.backend.run(&job);
                self.finish(job, worker, result)?;
            }
            return Ok(());
        }
        match self.rx.recv_timeout(self.options.poll) {
            Ok((job, worker, result)) => self.finish(job, worker, result),
            Err(RecvTimeoutError::Timeout) => Ok(()),
            Err(RecvTimeoutError::Disconnected) => unreachable!("the orchestrator keeps a sender"),
        }
    }

    fn finish(
        &mut self,
        job: TrialJob,
        _worker: usize,
        result: Result<f64, TrialError>,
    ) -> Result<(), OrchestratorError> {
        self.running.remove(&job.number);
        debug_assert_eq!(
            self.study.trial(job.number).map(|t| t.status),
            Some(TrialStatus::Running)
        );
        match result {
            Ok(value) if value.is_finite() => {
                let ordinal = self.study.completed_count() + 1;
                self.emit(EventPayload::TrialCompleted {
                    number: job.number,
                    ordinal,
                    value,
                })
            }
            other => {
                let failure = match other {
                    Err(e) => e,
                    Ok(_) => TrialError::Launch("non-finite objective".into()),
                };
                let permanent =
                    retry_policy(&failure, job.attempt, self.options.max_attempts) == RetryDecision::GiveUp;
                self.emit(EventPayload::TrialFailed {
                    number: job.number,
                    attempt: job.attempt,
                    reason: failure.to_string(),
                    permanent,
                })
            }
        }
    }
}

/// How many scripted replies the decided rounds of a log consumed.
pub fn consumed_replies(replayed: &Replayed) -> usize {
    replayed
        .records
        .iter()
        .filter(|r| match &r.payload {
            EventPayload::ReasoningRecorded { record } => {
                record.response.is_some() && record.round <= replayed.study.round
            }
            _ => false,
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::TraceSink;
    use crate::clock::StepClock;
    use crate::manager::backend::TabulatedBackend;
    use crate::manager::control::ControlCommand;
    use crate::manager::events::{replay, BackendSpec};
    use crate::manager::table::{Table, TableMeta};
    use crate::model::{space_from, Direction, Scalar};
    use crate::solvers::{GridSolver, SolverKind};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    fn table(card: i64, latency_ms: u64) -> (Arc<Table>, TabulatedBackend) {
        let space = space_from(&[("a", (0..card).map(Scalar::Int).collect())]).unwrap();
        let values = (0..card).map(|i| (i * 7 % card) as f64).collect();
        let t = Arc::new(
            Table::new(
                TableMeta {
                    name: "t".into(),
                    direction: Direction::Maximize,
                    metric: "v".into(),
                    count: card as usize,
                },
                space,
                values,
            )
            .unwrap(),
        );
        let b = TabulatedBackend::new(t.clone(), Duration::from_millis(latency_ms));
        (t, b)
    }

    fn header(t: &Table, n_jobs: usize) -> StudyHeader {
        StudyHeader {
            id: "s".into(),
            space: t.space.clone(),
            direction: Direction::Maximize,
            max_trials: t.space.cardinality(),
            n_jobs,
            solver: "grid".into(),
            system_context: String::new(),
            metric: "v".into(),
        }
    }

    fn run_spec(slots: usize, supervised: bool) -> RunSpec {
        RunSpec {
            solver: SolverKind::Grid,
            seed: 1,
            slots,
            supervised,
            backend: BackendSpec::Tabulated {
                table: "t.csv".into(),
                latency_ms: 0,
            },
            agent: None,
            playbook: None,
            initial: vec![],
        }
    }

    fn grid_orch(
        card: i64,
        n_jobs: usize,
        slots: usize,
        latency_ms: u64,
    ) -> Orchestrator<Vec<u8>> {
        let (t, b) = table(card, latency_ms);
        Orchestrator::create(
            header(&t, n_jobs),
            run_spec(slots, false),
            EventWriter::new(Vec::new(), 1),
            Box::new(GridSolver),
            Arc::new(b),
            Arc::new(StepClock::new(0, 1)),
        )
        .unwrap()
    }

    #[test]
    fn grid_runs_to_exhaustion_and_log_replays() {
        let mut o = grid_orch(6, 2, 2, 0);
        assert_eq!(o.run().unwrap(), RunOutcome::Finished(Lifecycle::Exhausted));
        assert_eq!(o.study().completed_count(), 6);
        let study = o.study().clone();
        let log = o.into_writer();
        let r = replay(&log).unwrap();
        assert_eq!(r.study, study);
        let numbers: Vec<usize> = study.completed().iter().map(|t| t.number).collect();
        assert_eq!(numbers, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn slot_bound_holds_with_real_threads() {
        let peak = Arc::new(AtomicUsize::new(0));
        let live = Arc::new(Mutex::new(0usize));
        let (p, l) = (peak.clone(), live.clone());
        let mut o = grid_orch(8, 4, 2, 5).with_observer(move |rec| {
            let mut n = l.lock().unwrap();
            match rec.payload {
                EventPayload::TrialStarted { .. } => *n += 1,
                EventPayload::TrialCompleted { .. } | EventPayload::TrialFailed { .. } => *n -= 1,
                _ => {}
            }
            p.fetch_max(*n, Ordering::SeqCst);
        });
        assert_eq!(o.run().unwrap(), RunOutcome::Finished(Lifecycle::Exhausted));
        assert_eq!(o.study().completed_count(), 8);
        assert_eq!(peak.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn budget_ends_the_study() {
        let mut o = grid_orch(6, 4, 1, 0);
        o.study.max_trials = 3;
        assert_eq!(o.run().unwrap(), RunOutcome::Finished(Lifecycle::Exhausted));
        assert_eq!(o.study().completed_count(), 3);
    }

    struct StopAfter(usize);

    impl Solver for StopAfter {
        fn name(&self) -> &str {
            "stop-after"
        }
        fn decide(
            &mut self,
            ctx: &SolverContext<'_>,
            trace: &mut dyn TraceSink,
        ) -> Result<SolverDecision, SolverError> {
            if ctx.study.completed_count() >= self.0 {
                return Ok(SolverDecision::stop(0.9, "enough"));
            }
            GridSolver.decide(ctx, trace)
        }
    }

    #[test]
    fn supervised_stop_waits_then_reject_continues() {
        let (t, b) = table(6, 0);
        let (tx, rx) = channel();
        let mut o = Orchestrator::create(
            header(&t, 1),
            run_spec(1, true),
            EventWriter::new(Vec::new(), 1),
            Box::new(StopAfter(2)),
            Arc::new(b),
            Arc::new(StepClock::new(0, 1)),
        )
        .unwrap();
        assert_eq!(o.run().unwrap(), RunOutcome::Suspended(Lifecycle::PendingStop));
        assert_eq!(o.study().completed_count(), 2);
        assert_eq!(o.study().pending_stop.as_ref().unwrap().confidence, 0.9);

        // Rejecting lets the search go on; the solver stops again at once, and
        // the approval ends the study.
        tx.send(ControlCommand::StopOverride { approve: false }).unwrap();
        o = o.with_control(Box::new(rx));
        let handle = std::thread::spawn(move || {
            std::thread::sleep(Duration::from_millis(100));
            tx.send(ControlCommand::StopOverride { approve: true }).unwrap();
        });
        assert_eq!(o.run().unwrap(), RunOutcome::Finished(Lifecycle::Stopped));
        handle.join().unwrap();
        assert_eq!(o.study().completed_count(), 2);
    }

    #[test]
    fn autonomous_stop_applies_at_once() {
        let (t, b) = table(6, 0);
        let mut o = Orchestrator::create(
            header(&t, 1),
            run_spec(1, false),
            EventWriter::new(Vec::new(), 1),
            Box::new(StopAfter(3)),
            Arc::new(b),
            Arc::new(StepClock::new(0, 1)),
        )
        .unwrap();
        assert_eq!(o.run().unwrap(), RunOutcome::Finished(Lifecycle::Stopped));
        assert_eq!(o.study().completed_count(), 3);
    }

    #[test]
    fn pause_lets_in_flight_trials_finish() {
        let mut o = grid_orch(8, 4, 4, 30);
        o.transition(LifecycleEvent::Start, "run").unwrap();
        o.advance().unwrap();
        o.dispatch().unwrap();
        assert_eq!(o.running.len(), 4);
        o.transition(LifecycleEvent::Pause, "control").unwrap();
        assert_eq!(o.run().unwrap(), RunOutcome::Suspended(Lifecycle::Paused));
        assert_eq!(o.study().completed_count(), 4);
        assert!(o.running.is_empty());
        assert_eq!(o.study().trials.len(), 4);

        let (tx, rx) = channel();
        tx.send(ControlCommand::Resume).unwrap();
        let mut o = o.with_control(Box::new(rx));
        assert_eq!(o.run().unwrap(), RunOutcome::Finished(Lifecycle::Exhausted));
        assert_eq!(o.study().completed_count(), 8);
    }

    #[test]
    fn seeds_are_submitted_first() {
        let (t, b) = table(6, 0);
        let mut run = run_spec(1, false);
        run.initial = vec![5, 3, 5];
        let mut o = Orchestrator::create(
            header(&t, 1),
            run,
            EventWriter::new(Vec::new(), 1),
            Box::new(GridSolver),
            Arc::new(b),
            Arc::new(StepClock::new(0, 1)),
        )
        .unwrap();
        o.run().unwrap();
        let order: Vec<(usize, String)> = o
            .study()
            .completed()
            .iter()
            .map(|t| (t.number, t.origin.clone()))
            .collect();
        assert_eq!(order[0], (5, "seed".to_string()));
        assert_eq!(order[1], (3, "seed".to_string()));
        assert_eq!(order[2], (0, "grid".to_string()));
    }

    struct Flaky;

    impl Backend for Flaky {
        fn run(&self, job: &TrialJob) -> Result<f64, TrialError> {
            match (job.number, job.attempt) {
                (0, 1) => Err(TrialError::Timeout(1)),
                (1, _) => Err(TrialError::NonZeroExit {
                    code: Some(2),
                    stderr: "bad".into(),
                }),
                (n, _) => Ok(n as f64),
            }
        }
        fn is_instant(&self) -> bool {
            true
        }
    }

    #[test]
    fn retries_then_gives_up() {
        let (t, _) = table(3, 0);
        let mut o = Orchestrator::create(
            header(&t, 3),
            run_spec(3, false),
            EventWriter::new(Vec::new(), 1),
            Box::new(GridSolver),
            Arc::new(Flaky),
            Arc::new(StepClock::new(0, 1)),
        )
        .unwrap();
        assert_eq!(o.run().unwrap(), RunOutcome::Finished(Lifecycle::Exhausted));
        let s = o.study();
        assert_eq!(s.trial(0).unwrap().status, TrialStatus::Completed);
        assert_eq!(s.trial(0).unwrap().attempts, 1);
        let failed = s.trial(1).unwrap();
        assert_eq!(failed.status, TrialStatus::Failed);
        assert_eq!(failed.attempts, 2);
        assert!(failed.failure.as_deref().unwrap().contains("bad"));
    }

    struct Liar;

    impl Solver for Liar {
        fn name(&self) -> &str {
            "liar"
        }
        fn decide(
            &mut self,
            ctx: &SolverContext<'_>,
            _trace: &mut dyn TraceSink,
        ) -> Result<SolverDecision, SolverError> {
            let s = Suggestion {
                number: 0,
                config: ctx.study.space.config_at(0).unwrap(),
            };
            Ok(SolverDecision::suggest(vec![s.clone(), s], "liar"))
        }
    }

    #[test]
    fn duplicate_suggestions_are_rejected() {
        let (t, b) = table(3, 0);
        let mut o = Orchestrator::create(
            header(&t, 2),
            run_spec(1, false),
            EventWriter::new(Vec::new(), 1),
            Box::new(Liar),
            Arc::new(b),
            Arc::new(StepClock::new(0, 1)),
        )
        .unwrap();
        assert!(matches!(o.run(), Err(OrchestratorError::InvalidDecision { .. })));
    }
}
