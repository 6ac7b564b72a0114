use std::collections::BTreeMap;

use serde::Serialize;

use super::ast::{AccessSpec, Act, DataDesc, Located, Program, Statement};
use super::ScriptError;
use crate::chronology::{StepInterval, TimeStep};
use crate::consent::{
    Action, AuthzQuery, ConsentId, Decision, EventId, Ledger, LedgerError, Reason, SubjectId,
};
use crate::ontology::ConceptKind;

/// Named individuals the script has introduced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum Individual {
    Subject(SubjectId),
    Consent(ConsentId),
    Event(EventId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Declared,
    Granted {
        consent: ConsentId,
    },
    Withdrawn {
        consent: ConsentId,
    },
    Recorded {
        event: EventId,
        authorized: bool,
        reason: Reason,
    },
    Advanced {
        step: TimeStep,
    },
    Assumed {
        passed: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatementOutcome {
    pub line: usize,
    pub statement: String,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssumeResult {
    pub line: usize,
    pub statement: String,
    pub expected: bool,
    pub actual: bool,
    pub passed: bool,
    pub reason: Reason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventVerdict {
    pub line: usize,
    pub event: EventId,
    pub action: Action,
    pub data: String,
    pub subject: String,
    pub recipient: String,
    pub step: TimeStep,
    pub authorized: bool,
    pub reason: Reason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub assumes: usize,
    pub assumes_passed: usize,
    pub assumes_failed: usize,
    pub events: usize,
    pub events_denied: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunReport {
    pub outcomes: Vec<StatementOutcome>,
    pub assumes: Vec<AssumeResult>,
    pub events: Vec<EventVerdict>,
    pub final_step: TimeStep,
    pub summary: RunSummary,
    /// Every assume held.
    pub passed: bool,
}

impl RunReport {
    pub fn failed_assumes(&self) -> impl Iterator<Item = &AssumeResult> {
        self.assumes.iter().filter(|a| !a.passed)
    }
}

/// Interpreter state: the knowledge base, clock, event counter, name tables
/// and the latest assumption flag.
#[derive(Debug, Clone)]
pub struct Interpreter {
    ledger: Ledger,
    next_event: u32,
    indiv: BTreeMap<String, Individual>,
    violated: bool,
    outcomes: Vec<StatementOutcome>,
    assumes: Vec<AssumeResult>,
    events: Vec<EventVerdict>,
}

impl Default for Interpreter {
    fn default() -> Self {
        Self::new()
    }
}

impl Interpreter {
    pub fn new() -> Self {
        Interpreter {
            ledger: Ledger::new(),
            next_event: 1,
            indiv: BTreeMap::new(),
            violated: false,
            outcomes: Vec::new(),
            assumes: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn now(&self) -> TimeStep {
        self.ledger.now()
    }

    pub fn individual(&self, name: &str) -> Option<&Individual> {
        self.indiv.get(name)
    }

    /// True when the most recent assume did not hold.
    pub fn violated(&self) -> bool {
        self.violated
    }

    pub fn run(&mut self, program: &Program) -> Result<(), ScriptError> {
        for located in &program.statements {
            self.execute(located)?;
        }
        Ok(())
    }

    pub fn execute(&mut self, located: &Located) -> Result<Outcome, ScriptError> {
        let line = located.line;
        let outcome = self
            .apply(line, &located.statement)
            .map_err(|source| ScriptError::Semantic { line, source })?;
        self.outcomes.push(StatementOutcome {
            line,
            statement: located.statement.to_string(),
            outcome: outcome.clone(),
        });
        Ok(outcome)
    }

    fn subject(&mut self, name: &str) {
        let id = self.ledger.register_subject(name);
        self.indiv
            .entry(name.to_owned())
            .or_insert(Individual::Subject(id));
    }

    /// Recipients are declared implicitly under the root on first use.
    fn recipient(&mut self, name: &str) -> Result<(), LedgerError> {
        if self.ledger.ontology().lookup(name).is_none() {
            self.ledger
                .declare_concept(name, ConceptKind::Recipient, &[])?;
        }
        Ok(())
    }

    fn prepare(&mut self, desc: &DataDesc) -> Result<(), LedgerError> {
        self.recipient(&desc.recipient)?;
        self.subject(&desc.subject);
        Ok(())
    }

    fn access_interval(&self, spec: &AccessSpec) -> Result<StepInterval, LedgerError> {
        Ok(match (spec.from, spec.to) {
            (None, _) => StepInterval::up_to(self.now()),
            (Some(from), None) => StepInterval::single(from),
            (Some(from), Some(to)) => StepInterval::new(from, Some(to))?,
        })
    }

    fn apply(&mut self, line: usize, statement: &Statement) -> Result<Outcome, LedgerError> {
        match statement {
            Statement::NewData { name, parent } => {
                let parents: Vec<&str> = parent.iter().map(String::as_str).collect();
                self.ledger
                    .declare_concept(name, ConceptKind::Data, &parents)?;
                Ok(Outcome::Declared)
            }
            Statement::NewRecipient { name, parent } => {
                let parents: Vec<&str> = parent.iter().map(String::as_str).collect();
                self.ledger
                    .declare_concept(name, ConceptKind::Recipient, &parents)?;
                Ok(Outcome::Declared)
            }
            Statement::NewDisjoint { names } => {
                let names: Vec<&str> = names.iter().map(String::as_str).collect();
                self.ledger.declare_disjoint(&names)?;
                Ok(Outcome::Declared)
            }
            Statement::NewEquiv { a, b } => {
                self.ledger.declare_equivalent(a, b)?;
                Ok(Outcome::Declared)
            }
            Statement::Grant { retro, desc, label } => {
                self.prepare(desc)?;
                let id =
                    self.ledger
                        .grant(&desc.data, &desc.subject, &desc.recipient, *retro, label)?;
                self.indiv.insert(label.clone(), Individual::Consent(id));
                Ok(Outcome::Granted { consent: id })
            }
            Statement::Withdraw { retro, label } => {
                let id = self.ledger.withdraw_label(label, *retro)?;
                Ok(Outcome::Withdrawn { consent: id })
            }
            Statement::Act(act) => {
                let (action, desc, interval) = match act {
                    Act::Collect(desc) => (Action::Collect, desc, None),
                    Act::Access(spec) => (
                        Action::Access,
                        &spec.desc,
                        Some(self.access_interval(spec)?),
                    ),
                };
                self.prepare(desc)?;
                let (event, decision) = self.ledger.record_event(
                    action,
                    &desc.data,
                    &desc.subject,
                    &desc.recipient,
                    interval,
                )?;
                debug_assert_eq!(event.get(), self.next_event);
                self.indiv.insert(
                    format!("event{}", self.next_event),
                    Individual::Event(event),
                );
                self.next_event += 1;
                self.events.push(EventVerdict {
                    line,
                    event,
                    action,
                    data: desc.data.clone(),
                    subject: desc.subject.clone(),
                    recipient: desc.recipient.clone(),
                    step: self.now(),
                    authorized: decision.authorized,
                    reason: decision.reason,
                });
                Ok(Outcome::Recorded {
                    event,
                    authorized: decision.authorized,
                    reason: decision.reason,
                })
            }
            Statement::Step => Ok(Outcome::Advanced {
                step: self.ledger.advance(),
            }),
            Statement::Assume { expected, act } => {
                let decision = self.query(act)?;
                let passed = decision.authorized == *expected;
                self.violated = !passed;
                self.assumes.push(AssumeResult {
                    line,
                    statement: statement.to_string(),
                    expected: *expected,
                    actual: decision.authorized,
                    passed,
                    reason: decision.reason,
                });
                Ok(Outcome::Assumed { passed })
            }
        }
    }

    /// Evaluates a collect/access in guaranteed mode without recording it.
    pub fn query(&mut self, act: &Act) -> Result<Decision, LedgerError> {
        let query = match act {
            Act::Collect(desc) => {
                self.prepare(desc)?;
                AuthzQuery::collect(&desc.data, &desc.subject, &desc.recipient)
            }
            Act::Access(spec) => {
                self.prepare(&spec.desc)?;
                let d = &spec.desc;
                AuthzQuery::access(&d.data, &d.subject, &d.recipient)
                    .collected(self.access_interval(spec)?)
                    .at(self.now())
            }
        };
        self.ledger.check(&query)
    }

    pub fn report(&self) -> RunReport {
        let assumes_passed = self.assumes.iter().filter(|a| a.passed).count();
        let summary = RunSummary {
            assumes: self.assumes.len(),
            assumes_passed,
            assumes_failed: self.assumes.len() - assumes_passed,
            events: self.events.len(),
            events_denied: self.events.iter().filter(|e| !e.authorized).count(),
        };
        RunReport {
            outcomes: self.outcomes.clone(),
            assumes: self.assumes.clone(),
            events: self.events.clone(),
            final_step: self.now(),
            passed: summary.assumes_failed == 0,
            summary,
        }
    }
}

/// Runs a parsed program from a fresh state.
pub fn execute(program: &Program) -> Result<RunReport, ScriptError> {
    let mut interp = Interpreter::new();
    interp.run(program)?;
    Ok(interp.report())
}
