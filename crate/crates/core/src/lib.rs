//! Consent verification engine.
//!
//! Decides whether data collection and access events are authorized by a
//! history of consent grants and withdrawals, each of which may be
//! retroactive or not, over data-type and recipient hierarchies that evolve
//! monotonically. The same engine backs a small scripting language for
//! design-time scenarios and a batch monitor for collection/access logs.

pub mod bench;
pub mod chronology;
pub mod consent;
pub mod monitor;
pub mod ontology;
pub mod script;

pub use chronology::{StepInterval, TimeStep};
pub use consent::{
    authorized_region, Action, AuthzQuery, ConsentId, ConsentRecord, ConsentWindow, Decision,
    EventId, EventRecord, Ledger, LedgerError, Mode, Reason,
};
pub use ontology::{ConceptGraph, ConceptId, ConceptKind, OntologyError};
