//! Ex-post monitoring of consent and collection/access logs.
//!
//! Both logs are line-delimited JSON. Wall-clock timestamps are mapped onto
//! framework steps from an epoch, the two logs are merged (consent records
//! first within a step, so a grant covers events of its own step), and the
//! result is replayed through a fresh [`Ledger`]. Every event whose verdict
//! denies is a violation.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use chrono::{DateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chronology::{StepInterval, TimeStep};
use crate::consent::{Action, EventRecord, Ledger, LedgerError, Reason};
use crate::script::{
    parse_script, print_program, tokenize, AccessSpec, Act, DataDesc, Interpreter, Program,
    ScriptError, Statement, TokenKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsentAction {
    Grant,
    Withdraw,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsentLogRecord {
    pub timestamp: DateTime<Utc>,
    pub action: ConsentAction,
    pub consent_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_concept: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipient_concept: Option<String>,
    #[serde(default)]
    pub retroactive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessLogRecord {
    pub timestamp: DateTime<Utc>,
    pub action: Action,
    pub data_concept: String,
    pub subject: String,
    pub recipient_concept: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collected_from: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collected_to: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LogKind {
    Consent,
    Access,
}

impl fmt::Display for LogKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogKind::Consent => f.write_str("consent log"),
            LogKind::Access => f.write_str("access log"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonitorError {
    #[error("{log} line {line}: {message}")]
    Parse {
        log: LogKind,
        line: usize,
        message: String,
    },
    #[error("{log} line {line}: timestamp earlier than the previous record")]
    Unordered { log: LogKind, line: usize },
    #[error("{log} line {line}: {message}")]
    Invalid {
        log: LogKind,
        line: usize,
        message: String,
    },
    #[error("{log} line {line}: {source}")]
    Record {
        log: LogKind,
        line: usize,
        source: LedgerError,
    },
    #[error("manifest: {0}")]
    Manifest(ScriptError),
    #[error("manifest line {0}: only `new` declarations are allowed")]
    ManifestStatement(usize),
    #[error("step duration must be at least one millisecond")]
    StepDuration,
    #[error("timestamp {timestamp} is before the epoch {epoch}")]
    BeforeEpoch {
        epoch: DateTime<Utc>,
        timestamp: DateTime<Utc>,
    },
}

impl MonitorError {
    fn invalid(log: LogKind, line: usize, message: impl Into<String>) -> Self {
        MonitorError::Invalid {
            log,
            line,
            message: message.into(),
        }
    }
}

/// How wall-clock time maps onto steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Clock {
    pub epoch: DateTime<Utc>,
    pub step: TimeDelta,
}

impl Clock {
    pub fn new(epoch: DateTime<Utc>, step: TimeDelta) -> Result<Self, MonitorError> {
        if step.num_milliseconds() < 1 {
            return Err(MonitorError::StepDuration);
        }
        Ok(Clock { epoch, step })
    }

    /// One step per day.
    pub fn daily(epoch: DateTime<Utc>) -> Self {
        Clock {
            epoch,
            step: TimeDelta::days(1),
        }
    }

    pub fn step_of(&self, timestamp: DateTime<Utc>) -> Result<TimeStep, MonitorError> {
        map_to_step(self.epoch, timestamp, self.step)
    }
}

/// `floor((timestamp - epoch) / step) + 1`
pub fn map_to_step(
    epoch: DateTime<Utc>,
    timestamp: DateTime<Utc>,
    step: TimeDelta,
) -> Result<TimeStep, MonitorError> {
    let step_ms = step.num_milliseconds();
    if step_ms < 1 {
        return Err(MonitorError::StepDuration);
    }
    let elapsed = (timestamp - epoch).num_milliseconds();
    if elapsed < 0 {
        return Err(MonitorError::BeforeEpoch { epoch, timestamp });
    }
    let index = u32::try_from(elapsed / step_ms + 1).map_err(|_| MonitorError::StepDuration)?;
    Ok(TimeStep::new(index).expect("index is at least 1"))
}

fn parse_lines<T: for<'de> Deserialize<'de>>(
    text: &str,
    log: LogKind,
    timestamp: impl Fn(&T) -> DateTime<Utc>,
) -> Result<Vec<(usize, T)>, MonitorError> {
    let mut out: Vec<(usize, T)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(raw).map_err(|e| MonitorError::Parse {
            log,
            line,
            message: e.to_string(),
        })?;
        if let Some((_, prev)) = out.last() {
            if timestamp(&record) < timestamp(prev) {
                return Err(MonitorError::Unordered { log, line });
            }
        }
        out.push((line, record));
    }
    Ok(out)
}

/// Parses a consent log, keeping source line numbers. Blank lines are
/// skipped; records must be in timestamp order.
pub fn parse_consent_log(text: &str) -> Result<Vec<(usize, ConsentLogRecord)>, MonitorError> {
    parse_lines(text, LogKind::Consent, |r: &ConsentLogRecord| r.timestamp)
}

pub fn parse_access_log(text: &str) -> Result<Vec<(usize, AccessLogRecord)>, MonitorError> {
    parse_lines(text, LogKind::Access, |r: &AccessLogRecord| r.timestamp)
}

/// Parses an ontology manifest: a script made only of `new` statements.
pub fn parse_manifest(text: &str) -> Result<Program, MonitorError> {
    let program = parse_script(text).map_err(MonitorError::Manifest)?;
    if let Some(bad) = program
        .statements
        .iter()
        .find(|l| !l.statement.is_declaration())
    {
        return Err(MonitorError::ManifestStatement(bad.line));
    }
    Ok(program)
}

/// Earliest timestamp across both logs, truncated to midnight UTC.
pub fn default_epoch(
    consents: &[(usize, ConsentLogRecord)],
    accesses: &[(usize, AccessLogRecord)],
) -> Option<DateTime<Utc>> {
    let first = consents
        .first()
        .map(|(_, r)| r.timestamp)
        .into_iter()
        .chain(accesses.first().map(|(_, r)| r.timestamp))
        .min()?;
    Some(first.date_naive().and_hms_opt(0, 0, 0)?.and_utc())
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Op {
    Grant {
        desc: DataDesc,
        retro: bool,
        label: String,
    },
    Withdraw {
        retro: bool,
        label: String,
    },
    Event {
        action: Action,
        desc: DataDesc,
        collected: Option<StepInterval>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Scheduled {
    step: TimeStep,
    log: LogKind,
    line: usize,
    timestamp: DateTime<Utc>,
    op: Op,
}

fn is_identifier(s: &str) -> bool {
    matches!(tokenize(s).as_deref(), Ok([t, _]) if t.kind == TokenKind::Ident(s.to_owned()))
}

fn is_label(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Validates both logs and orders them into one replay schedule.
fn schedule(
    consents: &[(usize, ConsentLogRecord)],
    accesses: &[(usize, AccessLogRecord)],
    clock: &Clock,
) -> Result<Vec<Scheduled>, MonitorError> {
    let mut out = Vec::with_capacity(consents.len() + accesses.len());
    let mut seen: BTreeMap<&str, bool> = BTreeMap::new();

    for (line, r) in consents {
        let (log, line) = (LogKind::Consent, *line);
        if !is_label(&r.consent_id) {
            return Err(MonitorError::invalid(
                log,
                line,
                format!("consent_id `{}` must use [A-Za-z0-9_.-]", r.consent_id),
            ));
        }
        let label = format!(":{}", r.consent_id);
        let op = match r.action {
            ConsentAction::Grant => {
                let field = |v: &Option<String>, name: &str| {
                    v.clone().ok_or_else(|| {
                        MonitorError::invalid(log, line, format!("grant without `{name}`"))
                    })
                };
                let desc = DataDesc {
                    data: field(&r.data_concept, "data_concept")?,
                    subject: field(&r.subject, "subject")?,
                    recipient: field(&r.recipient_concept, "recipient_concept")?,
                };
                if !is_identifier(&desc.subject) {
                    return Err(MonitorError::invalid(
                        log,
                        line,
                        format!("subject `{}` is not a plain identifier", desc.subject),
                    ));
                }
                if seen.insert(&r.consent_id, false).is_some() {
                    return Err(MonitorError::invalid(
                        log,
                        line,
                        format!("consent `{}` granted twice", r.consent_id),
                    ));
                }
                Op::Grant {
                    desc,
                    retro: r.retroactive,
                    label,
                }
            }
            ConsentAction::Withdraw => {
                match seen.get_mut(r.consent_id.as_str()) {
                    None => {
                        return Err(MonitorError::invalid(
                            log,
                            line,
                            format!("withdrawal of unknown consent `{}`", r.consent_id),
                        ))
                    }
                    Some(true) => {
                        return Err(MonitorError::invalid(
                            log,
                            line,
                            format!("consent `{}` withdrawn twice", r.consent_id),
                        ))
                    }
                    Some(withdrawn) => *withdrawn = true,
                }
                Op::Withdraw {
                    retro: r.retroactive,
                    label,
                }
            }
        };
        out.push(Scheduled {
            step: clock.step_of(r.timestamp)?,
            log,
            line,
            timestamp: r.timestamp,
            op,
        });
    }

    for (line, r) in accesses {
        let (log, line) = (LogKind::Access, *line);
        if !is_identifier(&r.subject) {
            return Err(MonitorError::invalid(
                log,
                line,
                format!("subject `{}` is not a plain identifier", r.subject),
            ));
        }
        let step = clock.step_of(r.timestamp)?;
        let collected = match r.action {
            Action::Collect => None,
            Action::Access => {
                if r.collected_to.is_some_and(|to| to > r.timestamp) {
                    return Err(MonitorError::invalid(
                        log,
                        line,
                        "collected_to is after the access timestamp",
                    ));
                }
                let from = match r.collected_from {
                    Some(ts) => clock.step_of(ts)?,
                    None => TimeStep::FIRST,
                };
                let to = match r.collected_to {
                    Some(ts) => clock.step_of(ts)?,
                    None => step,
                };
                Some(StepInterval::new(from, Some(to.advance())).map_err(|_| {
                    MonitorError::invalid(log, line, "collected_from is after collected_to")
                })?)
            }
        };
        out.push(Scheduled {
            step,
            log,
            line,
            timestamp: r.timestamp,
            op: Op::Event {
                action: r.action,
                desc: DataDesc {
                    data: r.data_concept.clone(),
                    subject: r.subject.clone(),
                    recipient: r.recipient_concept.clone(),
                },
                collected,
            },
        });
    }

    // consent records before events within a step; each log keeps its order
    out.sort_by_key(|s| (s.step, s.log == LogKind::Access));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Line of the access log record.
    pub line: usize,
    pub timestamp: DateTime<Utc>,
    pub step: TimeStep,
    pub action: Action,
    pub data: String,
    pub subject: String,
    pub recipient: String,
    pub reason: Reason,
    pub event: EventRecord,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReportSummary {
    pub events: usize,
    pub violations: usize,
    pub by_reason: BTreeMap<Reason, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
    pub summary: ReportSummary,
    pub clean: bool,
}

impl ViolationReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for v in &self.violations {
            let interval = v
                .event
                .collected_interval
                .map(|iv| format!(" collected {iv}"))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "VIOLATION access-log line {}: {} {} {} {} at {} ({}){} -> {}",
                v.line,
                v.action,
                v.data,
                v.subject,
                v.recipient,
                v.step,
                v.timestamp.to_rfc3339(),
                interval,
                v.reason
            );
        }
        let _ = writeln!(
            out,
            "{} events scanned, {} violations{}",
            self.summary.events,
            self.summary.violations,
            if self.clean { " (clean)" } else { "" }
        );
        for (reason, count) in &self.summary.by_reason {
            let _ = writeln!(out, "  {reason}: {count}");
        }
        out
    }
}

fn manifest_ledger(manifest: &Program) -> Result<Ledger, MonitorError> {
    let mut interp = Interpreter::new();
    for located in &manifest.statements {
        if !located.statement.is_declaration() {
            return Err(MonitorError::ManifestStatement(located.line));
        }
        interp.execute(located).map_err(MonitorError::Manifest)?;
    }
    Ok(interp.ledger().clone())
}

/// Replays both logs against the manifest's ontology and reports every
/// collection or access that no consent authorized.
pub fn scan(
    manifest: &Program,
    consents: &[(usize, ConsentLogRecord)],
    accesses: &[(usize, AccessLogRecord)],
    clock: &Clock,
) -> Result<ViolationReport, MonitorError> {
    let mut ledger = manifest_ledger(manifest)?;
    let plan = schedule(consents, accesses, clock)?;
    let mut report = ViolationReport::default();

    for item in plan {
        while ledger.now() < item.step {
            ledger.advance();
        }
        let wrap = |source| MonitorError::Record {
            log: item.log,
            line: item.line,
            source,
        };
        match &item.op {
            Op::Grant { desc, retro, label } => {
                ledger
                    .grant(&desc.data, &desc.subject, &desc.recipient, *retro, label)
                    .map_err(wrap)?;
            }
            Op::Withdraw { retro, label } => {
                ledger.withdraw_label(label, *retro).map_err(wrap)?;
            }
            Op::Event {
                action,
                desc,
                collected,
            } => {
                let (id, decision) = ledger
                    .record_event(
                        *action,
                        &desc.data,
                        &desc.subject,
                        &desc.recipient,
                        *collected,
                    )
                    .map_err(wrap)?;
                report.summary.events += 1;
                if !decision.authorized {
                    let event = ledger.events()[id.get() as usize - 1].clone();
                    *report.summary.by_reason.entry(decision.reason).or_default() += 1;
                    report.violations.push(Violation {
                        line: item.line,
                        timestamp: item.timestamp,
                        step: item.step,
                        action: *action,
                        data: desc.data.clone(),
                        subject: desc.subject.clone(),
                        recipient: desc.recipient.clone(),
                        reason: decision.reason,
                        event,
                    });
                }
            }
        }
    }
    report.summary.violations = report.violations.len();
    report.clean = report.violations.is_empty();
    Ok(report)
}

/// Renders the manifest and both logs as one script whose execution yields
/// the same per-event verdicts as [`scan`].
pub fn translate_to_script(
    manifest: &Program,
    consents: &[(usize, ConsentLogRecord)],
    accesses: &[(usize, AccessLogRecord)],
    clock: &Clock,
) -> Result<String, MonitorError> {
    let plan = schedule(consents, accesses, clock)?;
    let mut statements: Vec<Statement> = manifest.iter().cloned().collect();
    let mut now = TimeStep::FIRST;
    for item in plan {
        while now < item.step {
            statements.push(Statement::Step);
            now = now.advance();
        }
        statements.push(match item.op {
            Op::Grant { desc, retro, label } => Statement::Grant { retro, desc, label },
            Op::Withdraw { retro, label } => Statement::Withdraw { retro, label },
            Op::Event {
                action: Action::Collect,
                desc,
                ..
            } => Statement::Act(Act::Collect(desc)),
            Op::Event {
                action: Action::Access,
                desc,
                collected,
            } => {
                let iv = collected.expect("access events carry an interval");
                Statement::Act(Act::Access(AccessSpec {
                    desc,
                    from: Some(iv.start()),
                    to: iv.end(),
                }))
            }
        });
    }
    Ok(print_program(statements.iter()))
}
