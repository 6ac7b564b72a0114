//! Simulation scenarios for measuring per-step cost as the history grows.
//!
//! Each step is one simulated day. A scenario drives a single-subject
//! [`Ledger`] and times the work done in every step; the whole run is
//! repeated [`REPETITIONS`] times.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chronology::{StepInterval, TimeStep};
use crate::consent::{Action, AuthzQuery, ConsentId, Ledger};
use crate::ontology::ConceptKind;

pub const REPETITIONS: usize = 5;
pub const REFINE_EVERY: u32 = 7;
pub const CHURN_EVERY: u32 = 90;
pub const CSV_HEADER: &str = "scenario,step,rep,micros";

const SUBJECT: &str = "user";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BenchError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("a simulation needs at least one step")]
    NoSteps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Steps,
    NestedData,
    NestedDataRecipients,
    QueryCollection,
    RefineQueryCollection,
    QueryAccess,
    RefineQueryAccess,
    Realistic,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::Steps,
        Scenario::NestedData,
        Scenario::NestedDataRecipients,
        Scenario::QueryCollection,
        Scenario::RefineQueryCollection,
        Scenario::QueryAccess,
        Scenario::RefineQueryAccess,
        Scenario::Realistic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Steps => "steps",
            Scenario::NestedData => "nested-data",
            Scenario::NestedDataRecipients => "nested-data-recipients",
            Scenario::QueryCollection => "query-collection",
            Scenario::RefineQueryCollection => "refine-query-collection",
            Scenario::QueryAccess => "query-access",
            Scenario::RefineQueryAccess => "refine-query-access",
            Scenario::Realistic => "realistic",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| BenchError::UnknownScenario(s.to_owned()))
    }
}

/// Per-step wall-clock durations for every repetition of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingSeries {
    pub scenario: Scenario,
    pub steps: u32,
    pub seed: u64,
    /// `runs[rep][step - 1]`
    pub runs: Vec<Vec<Duration>>,
}

impl TimingSeries {
    pub fn repetitions(&self) -> usize {
        self.runs.len()
    }

    /// Mean over repetitions of one step's duration.
    pub fn mean_at(&self, step: u32) -> Duration {
        let idx = step as usize - 1;
        let total: Duration = self.runs.iter().map(|r| r[idx]).sum();
        total / self.runs.len() as u32
    }

    /// Median over `first..=last` of the per-step means.
    pub fn median(&self, first: u32, last: u32) -> Duration {
        let mut means: Vec<Duration> = (first..=last.min(self.steps))
            .map(|s| self.mean_at(s))
            .collect();
        means.sort();
        let n = means.len();
        if n == 0 {
            Duration::ZERO
        } else if n % 2 == 1 {
            means[n / 2]
        } else {
            (means[n / 2 - 1] + means[n / 2]) / 2
        }
    }

    pub fn max(&self) -> Duration {
        self.runs
            .iter()
            .flatten()
            .copied()
            .max()
            .unwrap_or_default()
    }

    /// CSV with header `scenario,step,rep,micros`; one row per step and
    /// repetition, reps numbered from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * self.runs.len() * self.steps as usize);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for (rep, run) in self.runs.iter().enumerate() {
            for (i, d) in run.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{:.3}",
                    self.scenario,
                    i + 1,
                    rep + 1,
                    d.as_nanos() as f64 / 1000.0
                );
            }
        }
        out
    }
}

/// What a run decided, independent of how long it took.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    /// `(step, action, authorized)` for every check performed.
    pub verdicts: Vec<(u32, Action, bool)>,
    /// Steps at which one consent was withdrawn and the next granted.
    pub churn_steps: Vec<u32>,
}

struct Sim {
    ledger: Ledger,
    data_tip: String,
    recipient_tip: String,
    data_count: u32,
    recipient_count: u32,
    consent: Option<ConsentId>,
    consent_count: u32,
    rng: ChaCha8Rng,
    trace: Trace,
}

impl Sim {
    fn new(seed: u64) -> Self {
        let mut ledger = Ledger::new();
        ledger
            .declare_concept("AppData", ConceptKind::Data, &[])
            .expect("fresh ontology");
        ledger
            .declare_concept("AppRecipient", ConceptKind::Recipient, &[])
            .expect("fresh ontology");
        ledger.register_subject(SUBJECT);
        Sim {
            ledger,
            data_tip: "AppData".into(),
            recipient_tip: "AppRecipient".into(),
            data_count: 0,
            recipient_count: 0,
            consent: None,
            consent_count: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            trace: Trace::default(),
        }
    }

    fn grant(&mut self) {
        self.consent_count += 1;
        let label = format!(":consent{}", self.consent_count);
        let id = self
            .ledger
            .grant("AppData", SUBJECT, "AppRecipient", false, &label)
            .expect("app concepts exist");
        self.consent = Some(id);
    }

    fn churn(&mut self) {
        if let Some(id) = self.consent.take() {
            self.ledger
                .withdraw(id, false)
                .expect("current consent is open");
        }
        self.grant();
        self.trace.churn_steps.push(self.ledger.now().index());
    }

    /// Nests a new data type under the most specific one.
    fn refine_data(&mut self) {
        self.data_count += 1;
        let name = format!("Data{}", self.data_count);
        self.ledger
            .declare_concept(&name, ConceptKind::Data, &[&self.data_tip])
            .expect("tip exists");
        self.data_tip = name;
    }

    fn refine_recipient(&mut self) {
        self.recipient_count += 1;
        let name = format!("Recipient{}", self.recipient_count);
        self.ledger
            .declare_concept(&name, ConceptKind::Recipient, &[&self.recipient_tip])
            .expect("tip exists");
        self.recipient_tip = name;
    }

    fn past_step(&mut self) -> TimeStep {
        let now = self.ledger.now().index();
        TimeStep::new(self.rng.random_range(1..=now)).expect("positive")
    }

    fn check(&mut self, action: Action) {
        let mut q = AuthzQuery::new(action, &self.data_tip, SUBJECT, &self.recipient_tip);
        if action == Action::Access {
            q = q.collected(StepInterval::single(self.past_step()));
        }
        let d = self.ledger.check(&q).expect("well-formed query");
        self.trace
            .verdicts
            .push((self.ledger.now().index(), action, d.authorized));
    }

    fn record(&mut self, action: Action) {
        let collected = (action == Action::Access).then(|| StepInterval::single(self.past_step()));
        let (data, recipient) = (self.data_tip.clone(), self.recipient_tip.clone());
        self.ledger
            .record_event(action, &data, SUBJECT, &recipient, collected)
            .expect("well-formed event");
    }

    fn step(&mut self, scenario: Scenario) {
        let today = self.ledger.now().index();
        match scenario {
            Scenario::Steps => {}
            Scenario::NestedData => self.refine_data(),
            Scenario::NestedDataRecipients => {
                self.refine_data();
                self.refine_recipient();
            }
            Scenario::QueryCollection => self.check(Action::Collect),
            Scenario::RefineQueryCollection => {
                self.refine_data();
                self.check(Action::Collect);
            }
            Scenario::QueryAccess => self.check(Action::Access),
            Scenario::RefineQueryAccess => {
                self.refine_data();
                self.check(Action::Access);
            }
            Scenario::Realistic => {
                if today.is_multiple_of(CHURN_EVERY) {
                    self.churn();
                }
                if today.is_multiple_of(REFINE_EVERY) {
                    self.refine_data();
                    self.refine_recipient();
                }
                self.check(Action::Collect);
                self.check(Action::Access);
                self.record(Action::Collect);
                self.record(Action::Access);
            }
        }
        self.ledger.advance();
    }
}

/// One repetition. With `timed` off no clock is read and every duration is
/// zero; the trace is the same either way.
pub fn run_once(scenario: Scenario, steps: u32, seed: u64, timed: bool) -> (Vec<Duration>, Trace) {
    let mut sim = Sim::new(seed);
    if !matches!(
        scenario,
        Scenario::Steps | Scenario::NestedData | Scenario::NestedDataRecipients
    ) {
        sim.grant();
    }
    let mut durations = Vec::with_capacity(steps as usize);
    for _ in 0..steps {
        if timed {
            let start = Instant::now();
            sim.step(scenario);
            durations.push(start.elapsed());
        } else {
            sim.step(scenario);
            durations.push(Duration::ZERO);
        }
    }
    (durations, sim.trace)
}

/// Runs a scenario [`REPETITIONS`] times and keeps every run's timings.
pub fn run_scenario(scenario: Scenario, steps: u32, seed: u64) -> Result<TimingSeries, BenchError> {
    if steps == 0 {
        return Err(BenchError::NoSteps);
    }
    let runs = (0..REPETITIONS)
        .map(|_| run_once(scenario, steps, seed, true).0)
        .collect();
    Ok(TimingSeries {
        scenario,
        steps,
        seed,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_names_round_trip() {
        for sc in Scenario::ALL {
            assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
        }
        assert!("weekly".parse::<Scenario>().is_err());
    }

    #[test]
    fn series_shape() {
        let s = run_scenario(Scenario::Steps, 30, 1).unwrap();
        assert_eq!(s.repetitions(), 5);
        assert!(s.runs.iter().all(|r| r.len() == 30));
        let single = run_scenario(Scenario::Steps, 1, 1).unwrap();
        assert!(single.runs.iter().all(|r| r.len() == 1));
        assert_eq!(
            run_scenario(Scenario::Steps, 0, 1),
            Err(BenchError::NoSteps)
        );
    }

    #[test]
    fn csv_rows() {
        let s = run_scenario(Scenario::Steps, 10, 1).unwrap();
        let csv = s.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.clone().count(), 50);
        assert!(lines.next().unwrap().starts_with("steps,1,1,"));
    }

    #[test]
    fn realistic_churns_every_ninety_days() {
        let (_, trace) = run_once(Scenario::Realistic, 365, 7, false);
        assert_eq!(trace.churn_steps, vec![90, 180, 270, 360]);
        assert_eq!(trace.verdicts.len(), 365 * 2);
        assert!(trace.verdicts.iter().all(|(_, _, ok)| *ok));
    }

    #[test]
    fn verdicts_do_not_depend_on_timing() {
        for sc in Scenario::ALL {
            let (_, timed) = run_once(sc, 60, 3, true);
            let (_, untimed) = run_once(sc, 60, 3, false);
            assert_eq!(timed, untimed, "{sc}");
        }
    }

    #[test]
    fn median_of_means() {
        let s = TimingSeries {
            scenario: Scenario::Steps,
            steps: 4,
            seed: 0,
            runs: vec![
                [1, 2, 3, 10].map(Duration::from_micros).to_vec(),
                [3, 2, 5, 10].map(Duration::from_micros).to_vec(),
            ],
        };
        assert_eq!(s.mean_at(1), Duration::from_micros(2));
        assert_eq!(s.median(1, 4), Duration::from_micros(3));
        assert_eq!(s.median(1, 3), Duration::from_micros(2));
    }
}
