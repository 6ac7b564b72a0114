//! Consent records, collection/access events and the authorization check.
//!
//! A consent opens a window at its grant step and may later be closed by a
//! single withdrawal. Retroactivity changes what the window covers:
//!
//! | grant      | withdrawal | access at `t_a` to data collected at `t_c` |
//! |------------|------------|--------------------------------------------|
//! | non-retro  | none       | `g <= t_c`                                 |
//! | retro      | none       | `g <= t_a`, any `t_c`                      |
//! | any        | non-retro  | additionally `t_c < w`                     |
//! | any        | retro      | additionally `t_a < w`                     |
//!
//! Collection is always `g <= t_c < w` whatever the flags are. A withdrawal
//! at step `w` already invalidates step `w` itself.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chronology::{StepInterval, TimeError, TimeStep};
use crate::ontology::{ConceptGraph, ConceptId, ConceptKind, OntologyError};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct SubjectId(String);

impl SubjectId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct ConsentId(u32);

impl ConsentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Monotone event counter, starting at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct EventId(u32);

impl EventId {
    pub fn get(self) -> u32 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Collect,
    Access,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Collect => f.write_str("collect"),
            Action::Access => f.write_str("access"),
        }
    }
}

/// Guaranteed demands provable coverage through subsumption; Possible only
/// demands that nothing declared rules the consent out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Guaranteed,
    Possible,
}

/// Why a query was answered the way it was. Variants are ordered by
/// increasing precedence among denial causes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Reason {
    Ok,
    OutsideGrantWindow,
    WithdrawnNonRetro,
    WithdrawnRetro,
    NoMatchingConsent,
    SubjectMismatch,
    ConceptUnsatisfiable,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Withdrawal {
    pub at: TimeStep,
    pub retroactive: bool,
}

/// The time dimension of a consent: when it opened, how, and whether and
/// how it closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ConsentWindow {
    pub granted_at: TimeStep,
    pub grant_retroactive: bool,
    pub withdrawal: Option<Withdrawal>,
}

impl ConsentWindow {
    pub fn open(granted_at: TimeStep, grant_retroactive: bool) -> Self {
        ConsentWindow {
            granted_at,
            grant_retroactive,
            withdrawal: None,
        }
    }

    #[must_use]
    pub fn withdrawn(mut self, at: TimeStep, retroactive: bool) -> Self {
        self.withdrawal = Some(Withdrawal { at, retroactive });
        self
    }

    pub fn authorizes_collection(&self, collected_at: TimeStep) -> bool {
        self.collection_failure(collected_at).is_none()
    }

    pub fn authorizes_access(&self, collected_at: TimeStep, accessed_at: TimeStep) -> bool {
        self.access_failure(collected_at, accessed_at).is_none()
    }

    fn withdrawal_reason(w: Withdrawal) -> Reason {
        if w.retroactive {
            Reason::WithdrawnRetro
        } else {
            Reason::WithdrawnNonRetro
        }
    }

    fn collection_failure(&self, t_c: TimeStep) -> Option<Reason> {
        if let Some(w) = self.withdrawal {
            if t_c >= w.at {
                return Some(Self::withdrawal_reason(w));
            }
        }
        (t_c < self.granted_at).then_some(Reason::OutsideGrantWindow)
    }

    fn access_failure(&self, t_c: TimeStep, t_a: TimeStep) -> Option<Reason> {
        if let Some(w) = self.withdrawal {
            let closed = if w.retroactive {
                t_a >= w.at
            } else {
                t_c >= w.at
            };
            if closed {
                return Some(Self::withdrawal_reason(w));
            }
        }
        let before_grant =
            t_a < self.granted_at || (!self.grant_retroactive && t_c < self.granted_at);
        before_grant.then_some(Reason::OutsideGrantWindow)
    }
}

/// Every `(t_c, t_a)` with `1 <= t_c <= t_a <= horizon` the window lets
/// through for access.
pub fn authorized_region(
    window: &ConsentWindow,
    horizon: TimeStep,
) -> BTreeSet<(TimeStep, TimeStep)> {
    let mut region = BTreeSet::new();
    for t_a in TimeStep::FIRST.through(horizon) {
        for t_c in TimeStep::FIRST.through(t_a) {
            if window.authorizes_access(t_c, t_a) {
                region.insert((t_c, t_a));
            }
        }
    }
    region
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConsentRecord {
    pub id: ConsentId,
    pub label: String,
    pub data: ConceptId,
    pub subject: SubjectId,
    pub recipient: ConceptId,
    #[serde(flatten)]
    pub window: ConsentWindow,
}

impl ConsentRecord {
    pub fn authorizes_collection(&self, collected_at: TimeStep) -> bool {
        self.window.authorizes_collection(collected_at)
    }

    pub fn authorizes_access(&self, collected_at: TimeStep, accessed_at: TimeStep) -> bool {
        self.window.authorizes_access(collected_at, accessed_at)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Decision {
    pub authorized: bool,
    /// Consents covering each step of the queried collection interval.
    pub coverage: BTreeMap<TimeStep, BTreeSet<ConsentId>>,
    pub reason: Reason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventRecord {
    pub id: EventId,
    pub action: Action,
    pub data: ConceptId,
    pub subject: SubjectId,
    pub recipient: ConceptId,
    pub occurred_at: TimeStep,
    /// Collection times of the accessed data; `None` for collections.
    pub collected_interval: Option<StepInterval>,
    pub verdict: Decision,
}

/// An authorization question. Omitted times default to: collection at the
/// current step; access now, to everything collected so far.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthzQuery {
    pub action: Action,
    pub data: String,
    pub subject: String,
    pub recipient: String,
    pub collected: Option<StepInterval>,
    pub access_at: Option<TimeStep>,
    pub mode: Mode,
}

impl AuthzQuery {
    pub fn new(action: Action, data: &str, subject: &str, recipient: &str) -> Self {
        AuthzQuery {
            action,
            data: data.to_owned(),
            subject: subject.to_owned(),
            recipient: recipient.to_owned(),
            collected: None,
            access_at: None,
            mode: Mode::Guaranteed,
        }
    }

    pub fn collect(data: &str, subject: &str, recipient: &str) -> Self {
        Self::new(Action::Collect, data, subject, recipient)
    }

    pub fn access(data: &str, subject: &str, recipient: &str) -> Self {
        Self::new(Action::Access, data, subject, recipient)
    }

    #[must_use]
    pub fn collected(mut self, interval: StepInterval) -> Self {
        self.collected = Some(interval);
        self
    }

    #[must_use]
    pub fn at(mut self, access_at: TimeStep) -> Self {
        self.access_at = Some(access_at);
        self
    }

    #[must_use]
    pub fn mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }
}

/// A purpose is the conjunction of a data type and a recipient role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Purpose {
    pub data: ConceptId,
    pub recipient: ConceptId,
}

/// Purpose limitation: an existing consent may serve a new purpose only when
/// the new purpose is subsumed by the consented one, componentwise.
pub fn purpose_compatible(graph: &ConceptGraph, existing: Purpose, new: Purpose) -> bool {
    graph.subsumes(existing.data, new.data) && graph.subsumes(existing.recipient, new.recipient)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Time(#[from] TimeError),
    #[error("unknown data subject `{0}`")]
    UnknownSubject(String),
    #[error("consent label `{0}` is already in use")]
    DuplicateLabel(String),
    #[error("unknown consent `{0}`")]
    UnknownConsent(String),
    #[error("consent `{0}` has already been withdrawn")]
    AlreadyWithdrawn(String),
    #[error("collection interval {interval} reaches past the access step {access_at}")]
    FutureCollection {
        interval: StepInterval,
        access_at: TimeStep,
    },
    #[error("collection interval {0} must be bounded")]
    UnboundedInterval(StepInterval),
    #[error(
        "declaration would make `{0}`, which recorded consents or events refer to, unsatisfiable"
    )]
    Inconsistent(String),
}

/// The consent history: an ontology plus append-only consents and events.
#[derive(Debug, Clone)]
pub struct Ledger {
    ontology: ConceptGraph,
    consents: Vec<ConsentRecord>,
    labels: HashMap<String, ConsentId>,
    events: Vec<EventRecord>,
    subjects: HashSet<SubjectId>,
    /// Concepts that recorded consents and events refer to.
    referenced: HashSet<ConceptId>,
    now: TimeStep,
}

impl Default for Ledger {
    fn default() -> Self {
        Self::new()
    }
}

impl Ledger {
    pub fn new() -> Self {
        Ledger {
            ontology: ConceptGraph::new(),
            consents: Vec::new(),
            labels: HashMap::new(),
            events: Vec::new(),
            subjects: HashSet::new(),
            referenced: HashSet::new(),
            now: TimeStep::FIRST,
        }
    }

    pub fn ontology(&self) -> &ConceptGraph {
        &self.ontology
    }

    pub fn now(&self) -> TimeStep {
        self.now
    }

    pub fn consents(&self) -> &[ConsentRecord] {
        &self.consents
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn consent(&self, id: ConsentId) -> Option<&ConsentRecord> {
        self.consents.get(id.index())
    }

    pub fn consent_by_label(&self, label: &str) -> Option<&ConsentRecord> {
        self.labels.get(label).map(|id| &self.consents[id.index()])
    }

    pub fn advance(&mut self) -> TimeStep {
        self.now = self.now.advance();
        self.now
    }

    pub fn register_subject(&mut self, name: &str) -> SubjectId {
        let id = SubjectId(name.to_owned());
        self.subjects.insert(id.clone());
        id
    }

    pub fn knows_subject(&self, name: &str) -> bool {
        self.subjects.contains(&SubjectId(name.to_owned()))
    }

    pub fn declare_concept(
        &mut self,
        name: &str,
        kind: ConceptKind,
        parents: &[&str],
    ) -> Result<ConceptId, LedgerError> {
        self.guarded(|g| g.declare_concept(name, kind, parents))
    }

    pub fn declare_equivalent(&mut self, a: &str, b: &str) -> Result<(), LedgerError> {
        self.guarded(|g| g.declare_equivalent(a, b))
    }

    pub fn declare_disjoint(&mut self, names: &[&str]) -> Result<(), LedgerError> {
        self.guarded(|g| g.declare_disjoint(names))
    }

    /// Applies an ontology update, rejecting it if a concept that recorded
    /// consents or events use would turn unsatisfiable.
    fn guarded<T>(
        &mut self,
        update: impl FnOnce(&mut ConceptGraph) -> Result<T, OntologyError>,
    ) -> Result<T, LedgerError> {
        if self.referenced.is_empty() {
            return Ok(update(&mut self.ontology)?);
        }
        let mut next = self.ontology.clone();
        let out = update(&mut next)?;
        let mut broken: Vec<ConceptId> = self
            .referenced
            .iter()
            .copied()
            .filter(|&c| next.is_unsatisfiable(c) && !self.ontology.is_unsatisfiable(c))
            .collect();
        broken.sort();
        if let Some(&c) = broken.first() {
            return Err(LedgerError::Inconsistent(next.name(c).to_owned()));
        }
        self.ontology = next;
        Ok(out)
    }

    fn resolve_pair(
        &self,
        data: &str,
        recipient: &str,
    ) -> Result<(ConceptId, ConceptId), LedgerError> {
        Ok((
            self.ontology.resolve(data, ConceptKind::Data)?,
            self.ontology.resolve(recipient, ConceptKind::Recipient)?,
        ))
    }

    /// Records a consent granted at the current step.
    pub fn grant(
        &mut self,
        data: &str,
        subject: &str,
        recipient: &str,
        retroactive: bool,
        label: &str,
    ) -> Result<ConsentId, LedgerError> {
        let (data, recipient) = self.resolve_pair(data, recipient)?;
        if self.labels.contains_key(label) {
            return Err(LedgerError::DuplicateLabel(label.to_owned()));
        }
        let subject = self.register_subject(subject);
        let id = ConsentId(self.consents.len() as u32);
        self.consents.push(ConsentRecord {
            id,
            label: label.to_owned(),
            data,
            subject,
            recipient,
            window: ConsentWindow::open(self.now, retroactive),
        });
        self.labels.insert(label.to_owned(), id);
        self.referenced.extend([data, recipient]);
        Ok(id)
    }

    /// Closes a consent's window at the current step.
    pub fn withdraw(&mut self, id: ConsentId, retroactive: bool) -> Result<(), LedgerError> {
        let now = self.now;
        let record = self
            .consents
            .get_mut(id.index())
            .ok_or_else(|| LedgerError::UnknownConsent(format!("#{}", id.0)))?;
        if record.window.withdrawal.is_some() {
            return Err(LedgerError::AlreadyWithdrawn(record.label.clone()));
        }
        record.window.withdrawal = Some(Withdrawal {
            at: now,
            retroactive,
        });
        Ok(())
    }

    pub fn withdraw_label(
        &mut self,
        label: &str,
        retroactive: bool,
    ) -> Result<ConsentId, LedgerError> {
        let id = *self
            .labels
            .get(label)
            .ok_or_else(|| LedgerError::UnknownConsent(label.to_owned()))?;
        self.withdraw(id, retroactive)?;
        Ok(id)
    }

    pub fn purpose_compatible(
        &self,
        existing: (&str, &str),
        new: (&str, &str),
    ) -> Result<bool, LedgerError> {
        let (d1, r1) = self.resolve_pair(existing.0, existing.1)?;
        let (d2, r2) = self.resolve_pair(new.0, new.1)?;
        Ok(purpose_compatible(
            &self.ontology,
            Purpose {
                data: d1,
                recipient: r1,
            },
            Purpose {
                data: d2,
                recipient: r2,
            },
        ))
    }

    pub fn check(&self, query: &AuthzQuery) -> Result<Decision, LedgerError> {
        let (data, recipient) = self.resolve_pair(&query.data, &query.recipient)?;
        let subject = SubjectId(query.subject.clone());
        if !self.subjects.contains(&subject) {
            return Err(LedgerError::UnknownSubject(query.subject.clone()));
        }
        let access_at = query.access_at.unwrap_or(self.now);
        let interval = match (query.collected, query.action) {
            (Some(iv), _) => iv,
            (None, Action::Collect) => StepInterval::single(self.now),
            (None, Action::Access) => StepInterval::up_to(access_at),
        };
        let last = interval
            .last()
            .ok_or(LedgerError::UnboundedInterval(interval))?;
        if query.action == Action::Access && last > access_at {
            return Err(LedgerError::FutureCollection {
                interval,
                access_at,
            });
        }
        Ok(self.decide(
            query.action,
            data,
            &subject,
            recipient,
            interval.start().through(last),
            access_at,
            query.mode,
        ))
    }

    fn concepts_match(
        &self,
        consent: &ConsentRecord,
        data: ConceptId,
        recipient: ConceptId,
        mode: Mode,
    ) -> bool {
        let g = &self.ontology;
        match mode {
            Mode::Guaranteed => {
                g.subsumes(consent.data, data) && g.subsumes(consent.recipient, recipient)
            }
            Mode::Possible => {
                !g.is_unsatisfiable(consent.data)
                    && !g.is_unsatisfiable(consent.recipient)
                    && !g.are_disjoint(consent.data, data)
                    && !g.are_disjoint(consent.recipient, recipient)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn decide(
        &self,
        action: Action,
        data: ConceptId,
        subject: &SubjectId,
        recipient: ConceptId,
        steps: impl Iterator<Item = TimeStep>,
        access_at: TimeStep,
        mode: Mode,
    ) -> Decision {
        let mut coverage: BTreeMap<TimeStep, BTreeSet<ConsentId>> =
            steps.map(|s| (s, BTreeSet::new())).collect();

        if self.ontology.is_unsatisfiable(data) || self.ontology.is_unsatisfiable(recipient) {
            return Decision {
                authorized: false,
                coverage,
                reason: Reason::ConceptUnsatisfiable,
            };
        }

        let mut concept_matched = false;
        let mut matching = Vec::new();
        for c in &self.consents {
            if self.concepts_match(c, data, recipient, mode) {
                concept_matched = true;
                if &c.subject == subject {
                    matching.push(c);
                }
            }
        }

        let failure = |c: &ConsentRecord, s: TimeStep| match action {
            Action::Collect => c.window.collection_failure(s),
            Action::Access => c.window.access_failure(s, access_at),
        };

        for (&step, covering) in coverage.iter_mut() {
            covering.extend(
                matching
                    .iter()
                    .filter(|c| failure(c, step).is_none())
                    .map(|c| c.id),
            );
        }
        let authorized = coverage.values().all(|c| !c.is_empty());
        let reason = if authorized {
            Reason::Ok
        } else if matching.is_empty() {
            if concept_matched {
                Reason::SubjectMismatch
            } else {
                Reason::NoMatchingConsent
            }
        } else {
            // strongest cause among the steps nobody covered
            coverage
                .iter()
                .filter(|(_, covering)| covering.is_empty())
                .flat_map(|(&step, _)| matching.iter().filter_map(move |c| failure(c, step)))
                .max()
                .unwrap_or(Reason::NoMatchingConsent)
        };
        Decision {
            authorized,
            coverage,
            reason,
        }
    }

    /// Records a collection or access at the current step, together with its
    /// verdict. Denied events are recorded too.
    pub fn record_event(
        &mut self,
        action: Action,
        data: &str,
        subject: &str,
        recipient: &str,
        collected: Option<StepInterval>,
    ) -> Result<(EventId, Decision), LedgerError> {
        let (data_id, recipient_id) = self.resolve_pair(data, recipient)?;
        let subject_id = self.register_subject(subject);
        let collected_interval = match action {
            Action::Collect => None,
            Action::Access => {
                let iv = collected.unwrap_or_else(|| StepInterval::up_to(self.now));
                match iv.last() {
                    None => return Err(LedgerError::UnboundedInterval(iv)),
                    Some(last) if last > self.now => {
                        return Err(LedgerError::FutureCollection {
                            interval: iv,
                            access_at: self.now,
                        })
                    }
                    Some(_) => Some(iv),
                }
            }
        };
        let mut query = AuthzQuery::new(action, data, subject, recipient).at(self.now);
        query.collected = collected_interval;
        let verdict = self.check(&query)?;
        let id = EventId(self.events.len() as u32 + 1);
        self.events.push(EventRecord {
            id,
            action,
            data: data_id,
            subject: subject_id,
            recipient: recipient_id,
            occurred_at: self.now,
            collected_interval,
            verdict: verdict.clone(),
        });
        self.referenced.extend([data_id, recipient_id]);
        Ok((id, verdict))
    }
}
