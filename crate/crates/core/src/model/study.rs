use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::decision::SolverDecision;
use super::space::{SearchSpace, TrialConfig};
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    /// True when `a` is strictly better than `b`.
    pub fn is_better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Maximize => a > b,
            Direction::Minimize => a < b,
        }
    }

    pub fn parse(s: &str) -> Option<Direction> {
        match s.trim().to_ascii_lowercase().as_str() {
            "maximize" | "max" | "ascend" => Some(Direction::Maximize),
            "minimize" | "min" | "descend" => Some(Direction::Minimize),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Pending,
    Running,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Enumeration number of the config; unique within a study.
    pub number: usize,
    pub config: TrialConfig,
    /// 1-based completion index, set only once Completed.
    pub ordinal: Option<usize>,
    pub value: Option<f64>,
    pub status: TrialStatus,
    /// Failed attempts so far.
    pub attempts: u32,
    pub worker: Option<usize>,
    pub submitted_at: u64,
    pub started_at: Option<u64>,
    pub ended_at: Option<u64>,
    /// Solver (or `"seed"`) that proposed this trial.
    pub origin: String,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lifecycle {
    Created,
    Running,
    Paused,
    /// A stop verdict is waiting for human approval (supervised mode).
    PendingStop,
    Stopped,
    Exhausted,
}

impl Lifecycle {
    pub fn is_terminal(self) -> bool {
        matches!(self, Lifecycle::Stopped | Lifecycle::Exhausted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LifecycleEvent {
    Start,
    Pause,
    Resume,
    Stop,
    RequestStop { confidence: f64, rationale: String },
    ApproveStop,
    RejectStop,
    Exhaust,
    SetMaxTrials { max_trials: usize },
    SetNJobs { n_jobs: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingStop {
    pub confidence: f64,
    pub rationale: String,
}

/// Fixed facts about a study, written once at creation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyHeader {
    pub id: String,
    pub space: SearchSpace,
    pub direction: Direction,
    pub max_trials: usize,
    pub n_jobs: usize,
    pub solver: String,
    pub system_context: String,
    /// Name of the objective as shown in prompts.
    pub metric: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub id: String,
    pub space: SearchSpace,
    pub direction: Direction,
    pub max_trials: usize,
    pub n_jobs: usize,
    pub trials: Vec<TrialRecord>,
    pub lifecycle: Lifecycle,
    pub solver: String,
    pub system_context: String,
    pub metric: String,
    /// Number of solver decisions recorded so far.
    pub round: u32,
    pub pending_stop: Option<PendingStop>,
    /// Last recorded decision whose effects are not fully applied yet
    /// (unsubmitted suggestions, or a stop not yet reflected in the lifecycle).
    pub outstanding: Option<SolverDecision>,
}

impl Study {
    pub fn new(header: StudyHeader) -> Result<Self, ModelError> {
        if header.max_trials == 0 {
            return Err(ModelError::InvalidAdjustment("max_trials must be positive".into()));
        }
        if header.n_jobs == 0 {
            return Err(ModelError::InvalidAdjustment("n_jobs must be positive".into()));
        }
        let max_trials = header.max_trials.min(header.space.cardinality());
        Ok(Self {
            id: header.id,
            space: header.space,
            direction: header.direction,
            max_trials,
            n_jobs: header.n_jobs,
            trials: Vec::new(),
            lifecycle: Lifecycle::Created,
            solver: header.solver,
            system_context: header.system_context,
            metric: header.metric,
            round: 0,
            pending_stop: None,
            outstanding: None,
        })
    }

    pub fn header(&self) -> StudyHeader {
        StudyHeader {
            id: self.id.clone(),
            space: self.space.clone(),
            direction: self.direction,
            max_trials: self.max_trials,
            n_jobs: self.n_jobs,
            solver: self.solver.clone(),
            system_context: self.system_context.clone(),
            metric: self.metric.clone(),
        }
    }

    pub fn trial(&self, number: usize) -> Option<&TrialRecord> {
        self.trials.iter().find(|t| t.number == number)
    }

    fn trial_mut(&mut self, number: usize) -> Result<&mut TrialRecord, ModelError> {
        self.trials
            .iter_mut()
            .find(|t| t.number == number)
            .ok_or(ModelError::UnknownTrial(number))
    }

    /// Completed trials in ordinal order.
    pub fn completed(&self) -> Vec<&TrialRecord> {
        let mut done: Vec<&TrialRecord> = self
            .trials
            .iter()
            .filter(|t| t.status == TrialStatus::Completed)
            .collect();
        done.sort_by_key(|t| t.ordinal);
        done
    }

    pub fn completed_count(&self) -> usize {
        self.trials
            .iter()
            .filter(|t| t.status == TrialStatus::Completed)
            .count()
    }

    pub fn values(&self) -> Vec<f64> {
        self.completed()
            .iter()
            .map(|t| t.value.expect("completed trials carry a value"))
            .collect()
    }

    /// Best completed trial; ties go to the earliest ordinal.
    pub fn best(&self) -> Option<&TrialRecord> {
        let mut best: Option<&TrialRecord> = None;
        for t in self.completed() {
            let v = t.value.expect("completed");
            match best {
                Some(b) if !self.direction.is_better(v, b.value.expect("completed")) => {}
                _ => best = Some(t),
            }
        }
        best
    }

    /// Every config that already has a record, whatever its status.
    pub fn explored(&self) -> BTreeSet<usize> {
        self.trials.iter().map(|t| t.number).collect()
    }

    pub fn unexplored(&self) -> Vec<usize> {
        let explored = self.explored();
        (0..self.space.cardinality())
            .filter(|n| !explored.contains(n))
            .collect()
    }

    pub fn pending(&self) -> Vec<usize> {
        self.trials
            .iter()
            .filter(|t| t.status == TrialStatus::Pending)
            .map(|t| t.number)
            .collect()
    }

    pub fn in_flight_count(&self) -> usize {
        self.trials
            .iter()
            .filter(|t| matches!(t.status, TrialStatus::Pending | TrialStatus::Running))
            .count()
    }

    pub fn submit(
        &mut self,
        number: usize,
        origin: &str,
        at: u64,
    ) -> Result<(), ModelError> {
        if self.trial(number).is_some() {
            return Err(ModelError::DuplicateTrial(number));
        }
        let config = self
            .space
            .config_at(number)
            .ok_or(ModelError::UnknownTrial(number))?;
        self.trials.push(TrialRecord {
            number,
            config,
            ordinal: None,
            value: None,
            status: TrialStatus::Pending,
            attempts: 0,
            worker: None,
            submitted_at: at,
            started_at: None,
            ended_at: None,
            origin: origin.to_string(),
            failure: None,
        });
        if let Some(SolverDecision::Suggest { suggestions, .. }) = &mut self.outstanding {
            suggestions.retain(|s| s.number != number);
            if suggestions.is_empty() {
                self.outstanding = None;
            }
        }
        Ok(())
    }

    pub fn start(&mut self, number: usize, worker: usize, at: u64) -> Result<(), ModelError> {
        let t = self.trial_mut(number)?;
        if t.status != TrialStatus::Pending {
            return Err(ModelError::BadTrialState { number, status: t.status });
        }
        t.status = TrialStatus::Running;
        t.worker = Some(worker);
        t.started_at = Some(at);
        Ok(())
    }

    /// Marks a running trial Completed and hands out the next ordinal.
    pub fn complete(&mut self, number: usize, value: f64, at: u64) -> Result<usize, ModelError> {
        if !value.is_finite() {
            return Err(ModelError::NonFiniteObjective(number));
        }
        let ordinal = self.completed_count() + 1;
        let t = self.trial_mut(number)?;
        if t.status != TrialStatus::Running {
            return Err(ModelError::BadTrialState { number, status: t.status });
        }
        t.status = TrialStatus::Completed;
        t.value = Some(value);
        t.ordinal = Some(ordinal);
        t.ended_at = Some(at);
        t.worker = None;
        Ok(ordinal)
    }

    /// Records a failed attempt; `permanent` failures are never retried.
    pub fn fail(
        &mut self,
        number: usize,
        reason: &str,
        permanent: bool,
        at: u64,
    ) -> Result<(), ModelError> {
        let t = self.trial_mut(number)?;
        if t.status != TrialStatus::Running {
            return Err(ModelError::BadTrialState { number, status: t.status });
        }
        t.attempts += 1;
        t.failure = Some(reason.to_string());
        t.worker = None;
        if permanent {
            t.status = TrialStatus::Failed;
            t.ended_at = Some(at);
        } else {
            t.status = TrialStatus::Pending;
        }
        Ok(())
    }

    /// After a crash nothing is running any more.
    pub fn revert_running(&mut self) {
        let running: Vec<usize> = self
            .trials
            .iter()
            .filter(|t| t.status == TrialStatus::Running)
            .map(|t| t.number)
            .collect();
        for n in running {
            self.revert_trial(n);
        }
    }

    /// Puts one running trial back in the queue without counting an attempt.
    pub fn revert_trial(&mut self, number: usize) {
        if let Ok(t) = self.trial_mut(number) {
            if t.status == TrialStatus::Running {
                t.status = TrialStatus::Pending;
                t.worker = None;
                t.started_at = None;
            }
        }
    }

    /// Notes a solver decision as round `round`. Suggestions for configs that
    /// already have a record are dropped.
    pub fn record_decision(&mut self, round: u32, decision: &SolverDecision) {
        self.round = round;
        self.outstanding = match decision {
            SolverDecision::Suggest {
                suggestions,
                rationale,
                origin,
            } => {
                let explored = self.explored();
                let left: Vec<_> = suggestions
                    .iter()
                    .filter(|s| !explored.contains(&s.number))
                    .cloned()
                    .collect();
                (!left.is_empty()).then(|| SolverDecision::Suggest {
                    suggestions: left,
                    rationale: rationale.clone(),
                    origin: origin.clone(),
                })
            }
            SolverDecision::Stop { .. } => Some(decision.clone()),
        };
    }

    pub fn apply_lifecycle_event(&self, event: &LifecycleEvent) -> Result<Study, ModelError> {
        let mut next = self.clone();
        next.transition(event)?;
        Ok(next)
    }

    /// In-place form of [`Study::apply_lifecycle_event`].
    pub fn transition(&mut self, event: &LifecycleEvent) -> Result<(), ModelError> {
        use Lifecycle as L;
        use LifecycleEvent as E;
        let from = self.lifecycle;
        let illegal = || ModelError::IllegalTransition {
            from,
            event: event_name(event),
        };
        match event {
            E::SetMaxTrials { max_trials } => {
                if !matches!(from, L::Running | L::Paused) {
                    return Err(illegal());
                }
                if *max_trials < self.completed_count().max(1) {
                    return Err(ModelError::InvalidAdjustment(format!(
                        "max_trials {max_trials} is below the {} completed trials",
                        self.completed_count()
                    )));
                }
                if *max_trials > self.space.cardinality() {
                    return Err(ModelError::InvalidAdjustment(format!(
                        "max_trials {max_trials} exceeds the space size {}",
                        self.space.cardinality()
                    )));
                }
                self.max_trials = *max_trials;
                return Ok(());
            }
            E::SetNJobs { n_jobs } => {
                if !matches!(from, L::Running | L::Paused) {
                    return Err(illegal());
                }
                if *n_jobs == 0 {
                    return Err(ModelError::InvalidAdjustment("n_jobs must be positive".into()));
                }
                self.n_jobs = *n_jobs;
                return Ok(());
            }
            _ => {}
        }
        let to = match (from, event) {
            (L::Created, E::Start) => L::Running,
            (L::Running, E::Pause) => L::Paused,
            (L::Paused, E::Resume) => L::Running,
            (L::Running, E::Stop) => L::Stopped,
            (L::Running, E::Exhaust) => L::Exhausted,
            (L::Running, E::RequestStop { confidence, rationale }) => {
                self.pending_stop = Some(PendingStop {
                    confidence: *confidence,
                    rationale: rationale.clone(),
                });
                L::PendingStop
            }
            (L::PendingStop, E::ApproveStop) | (L::PendingStop, E::Stop) => L::Stopped,
            (L::PendingStop, E::RejectStop) => L::Running,
            _ => return Err(illegal()),
        };
        if from == L::PendingStop {
            self.pending_stop = None;
        }
        if matches!(self.outstanding, Some(SolverDecision::Stop { .. })) {
            self.outstanding = None;
        }
        self.lifecycle = to;
        Ok(())
    }
}

pub fn event_name(event: &LifecycleEvent) -> &'static str {
    match event {
        LifecycleEvent::Start => "start",
        LifecycleEvent::Pause => "pause",
        LifecycleEvent::Resume => "resume",
        LifecycleEvent::Stop => "stop",
        LifecycleEvent::RequestStop { .. } => "request_stop",
        LifecycleEvent::ApproveStop => "approve_stop",
        LifecycleEvent::RejectStop => "reject_stop",
        LifecycleEvent::Exhaust => "exhaust",
        LifecycleEvent::SetMaxTrials { .. } => "set_max_trials",
        LifecycleEvent::SetNJobs { .. } => "set_n_jobs",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::space::{space_from, Scalar};

    pub(crate) fn study(card: i64) -> Study {
        let space = space_from(&[("a", (0..card).map(Scalar::Int).collect())]).unwrap();
        Study::new(StudyHeader {
            id: "s".into(),
            space,
            direction: Direction::Maximize,
            max_trials: card as usize,
            n_jobs: 2,
            solver: "grid".into(),
            system_context: String::new(),
            metric: "value".into(),
        })
        .unwrap()
    }

    fn running(card: i64) -> Study {
        study(card).apply_lifecycle_event(&LifecycleEvent::Start).unwrap()
    }

    #[test]
    fn pause_from_running() {
        let s = running(4).apply_lifecycle_event(&LifecycleEvent::Pause).unwrap();
        assert_eq!(s.lifecycle, Lifecycle::Paused);
    }

    #[test]
    fn resume_on_stopped_is_illegal() {
        let s = running(4).apply_lifecycle_event(&LifecycleEvent::Stop).unwrap();
        assert!(matches!(
            s.apply_lifecycle_event(&LifecycleEvent::Resume),
            Err(ModelError::IllegalTransition { from: Lifecycle::Stopped, .. })
        ));
    }

    #[test]
    fn adjust_budget_while_paused() {
        let mut s = study(60);
        s.max_trials = 20;
        s.transition(&LifecycleEvent::Start).unwrap();
        for n in 0..10 {
            s.submit(n, "grid", 0).unwrap();
            s.start(n, 0, 0).unwrap();
            s.complete(n, n as f64, 0).unwrap();
        }
        s.transition(&LifecycleEvent::Pause).unwrap();
        let s2 = s
            .apply_lifecycle_event(&LifecycleEvent::SetMaxTrials { max_trials: 50 })
            .unwrap();
        assert_eq!(s2.lifecycle, Lifecycle::Paused);
        assert_eq!(s2.max_trials, 50);
        assert!(matches!(
            s.apply_lifecycle_event(&LifecycleEvent::SetMaxTrials { max_trials: 9 }),
            Err(ModelError::InvalidAdjustment(_))
        ));
    }

    #[test]
    fn ordinals_follow_completion_order() {
        let mut s = running(5);
        for n in [3, 1, 4] {
            s.submit(n, "t", 0).unwrap();
            s.start(n, 0, 0).unwrap();
        }
        assert_eq!(s.complete(4, 1.0, 1).unwrap(), 1);
        assert_eq!(s.complete(1, 2.0, 2).unwrap(), 2);
        s.fail(3, "boom", true, 3).unwrap();
        assert_eq!(s.completed_count(), 2);
        assert_eq!(s.best().unwrap().number, 1);
        assert_eq!(s.unexplored(), vec![0, 2]);
    }

    #[test]
    fn best_prefers_earliest_on_ties() {
        let mut s = running(3);
        for (n, v) in [(2, 5.0), (0, 5.0), (1, 4.0)] {
            s.submit(n, "t", 0).unwrap();
            s.start(n, 0, 0).unwrap();
            s.complete(n, v, 0).unwrap();
        }
        assert_eq!(s.best().unwrap().number, 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_event() -> impl Strategy<Value = LifecycleEvent> {
            prop_oneof![
                Just(LifecycleEvent::Start),
                Just(LifecycleEvent::Pause),
                Just(LifecycleEvent::Resume),
                Just(LifecycleEvent::Stop),
                Just(LifecycleEvent::Exhaust),
                Just(LifecycleEvent::ApproveStop),
                Just(LifecycleEvent::RejectStop),
                Just(LifecycleEvent::RequestStop { confidence: 0.9, rationale: String::new() }),
                (0usize..12).prop_map(|m| LifecycleEvent::SetMaxTrials { max_trials: m }),
                (0usize..4).prop_map(|n| LifecycleEvent::SetNJobs { n_jobs: n }),
            ]
        }

        fn allowed(from: Lifecycle, to: Lifecycle) -> bool {
            use Lifecycle as L;
            from == to
                || matches!(
                    (from, to),
                    (L::Created, L::Running)
                        | (L::Running, L::Paused)
                        | (L::Paused, L::Running)
                        | (L::Running, L::Stopped)
                        | (L::Running, L::Exhausted)
                        | (L::Running, L::PendingStop)
                        | (L::PendingStop, L::Stopped)
                        | (L::PendingStop, L::Running)
                )
        }

        proptest! {
            #[test]
            fn never_leaves_the_transition_graph(events in prop::collection::vec(arb_event(), 0..40)) {
                let mut s = study(10);
                for ev in &events {
                    let before = s.clone();
                    match s.transition(ev) {
                        Ok(()) => prop_assert!(allowed(before.lifecycle, s.lifecycle)),
                        Err(_) => prop_assert_eq!(&before, &s),
                    }
                    if before.lifecycle.is_terminal() {
                        prop_assert_eq!(&before, &s);
                    }
                    prop_assert!(s.completed_count() <= s.max_trials);
                    prop_assert!(s.max_trials <= s.space.cardinality());
                }
            }
        }
    }
}
