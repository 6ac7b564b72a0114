//! Forward-time steps and half-open step intervals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimeError {
    #[error("time steps start at 1")]
    ZeroStep,
    #[error("interval end {end} must be after its start {start}")]
    EmptyInterval { start: TimeStep, end: TimeStep },
    #[error("`{0}` is not a time step (expected T<digits>)")]
    BadToken(String),
}

/// A 1-based step of framework time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct TimeStep(u32);

impl TimeStep {
    pub const FIRST: TimeStep = TimeStep(1);

    pub fn new(index: u32) -> Result<Self, TimeError> {
        if index == 0 {
            Err(TimeError::ZeroStep)
        } else {
            Ok(TimeStep(index))
        }
    }

    pub fn index(self) -> u32 {
        self.0
    }

    /// The next step. Time only moves forward.
    #[must_use]
    pub fn advance(self) -> TimeStep {
        TimeStep(self.0 + 1)
    }

    /// Every step from `self` up to and including `last`.
    pub fn through(self, last: TimeStep) -> impl Iterator<Item = TimeStep> {
        (self.0..=last.0).map(TimeStep)
    }
}

impl TryFrom<u32> for TimeStep {
    type Error = TimeError;

    fn try_from(value: u32) -> Result<Self, Self::Error> {
        TimeStep::new(value)
    }
}

impl From<TimeStep> for u32 {
    fn from(value: TimeStep) -> Self {
        value.0
    }
}

impl fmt::Display for TimeStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.0)
    }
}

impl FromStr for TimeStep {
    type Err = TimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .strip_prefix('T')
            .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
            .ok_or_else(|| TimeError::BadToken(s.to_owned()))?;
        let index: u32 = digits
            .parse()
            .map_err(|_| TimeError::BadToken(s.to_owned()))?;
        TimeStep::new(index)
    }
}

/// `[start, end)`, or `[start, ∞)` when `end` is absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StepInterval {
    start: TimeStep,
    end: Option<TimeStep>,
}

impl StepInterval {
    pub fn new(start: TimeStep, end: Option<TimeStep>) -> Result<Self, TimeError> {
        match end {
            Some(end) if end <= start => Err(TimeError::EmptyInterval { start, end }),
            _ => Ok(StepInterval { start, end }),
        }
    }

    pub fn single(step: TimeStep) -> Self {
        StepInterval {
            start: step,
            end: Some(step.advance()),
        }
    }

    /// `[1, last + 1)`: the whole history up to and including `last`.
    pub fn up_to(last: TimeStep) -> Self {
        StepInterval {
            start: TimeStep::FIRST,
            end: Some(last.advance()),
        }
    }

    pub fn start(&self) -> TimeStep {
        self.start
    }

    pub fn end(&self) -> Option<TimeStep> {
        self.end
    }

    pub fn contains(&self, step: TimeStep) -> bool {
        self.start <= step && self.end.is_none_or(|end| step < end)
    }

    /// Largest member step, if the interval is bounded.
    pub fn last(&self) -> Option<TimeStep> {
        self.end.map(|end| TimeStep(end.0 - 1))
    }

    /// Member steps of a bounded interval; `None` when open-ended.
    pub fn steps(&self) -> Option<impl Iterator<Item = TimeStep>> {
        self.last().map(|last| self.start.through(last))
    }
}

impl fmt::Display for StepInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.end {
            Some(end) => write!(f, "[{}, {})", self.start, end),
            None => write!(f, "[{}, ...)", self.start),
        }
    }
}
