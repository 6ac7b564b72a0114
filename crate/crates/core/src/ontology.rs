//! Monotonic concept hierarchies for data types and recipients.
//!
//! The graph is append-only: concepts, parent edges, equivalences and
//! disjointness facts can be added but never removed. Two roots exist from
//! the start, `Data` and `Recipient`, and every other concept belongs to
//! exactly one of them.
//!
//! Subsumption is answered from a cached ancestor closure. Declaring a fresh
//! leaf extends the closure incrementally; anything that can change the
//! ancestry of existing concepts (a second parent, an equivalence) rebuilds
//! it from the edge lists.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Stable identifier of a concept, assigned at first declaration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct ConceptId(u32);

impl ConceptId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConceptKind {
    Data,
    Recipient,
}

impl ConceptKind {
    pub fn root_name(self) -> &'static str {
        match self {
            ConceptKind::Data => "Data",
            ConceptKind::Recipient => "Recipient",
        }
    }
}

impl fmt::Display for ConceptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConceptKind::Data => f.write_str("data"),
            ConceptKind::Recipient => f.write_str("recipient"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OntologyError {
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("`{name}` is a {actual} concept, expected a {expected} concept")]
    KindMismatch {
        name: String,
        expected: ConceptKind,
        actual: ConceptKind,
    },
    #[error("`{0}` is a root concept and cannot be redeclared")]
    RootRedeclared(String),
    #[error("a disjointness declaration needs at least two concepts")]
    TooFewDisjoint,
    #[error("`{0}` cannot be disjoint from itself")]
    SelfDisjoint(String),
    #[error("`{general}` subsumes `{specific}`, they cannot be declared disjoint")]
    DisjointRelated { general: String, specific: String },
    #[error("`{a}` and `{b}` are disjoint, they cannot be declared equivalent")]
    EquivalentDisjoint { a: String, b: String },
}

#[derive(Debug, Clone)]
struct Concept {
    name: String,
    kind: ConceptKind,
    parents: Vec<ConceptId>,
}

#[derive(Debug, Clone)]
pub struct ConceptGraph {
    concepts: Vec<Concept>,
    by_name: HashMap<String, ConceptId>,
    /// Representative of each concept's equivalence group.
    group: Vec<ConceptId>,
    members: HashMap<ConceptId, Vec<ConceptId>>,
    disjoint: Vec<(ConceptId, ConceptId)>,
    disjoint_seen: HashSet<(ConceptId, ConceptId)>,
    /// `closure[c]` holds every concept that subsumes `c`, `c` included.
    closure: Vec<HashSet<ConceptId>>,
    data_root: ConceptId,
    recipient_root: ConceptId,
}

impl Default for ConceptGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl ConceptGraph {
    pub fn new() -> Self {
        let mut graph = ConceptGraph {
            concepts: Vec::new(),
            by_name: HashMap::new(),
            group: Vec::new(),
            members: HashMap::new(),
            disjoint: Vec::new(),
            disjoint_seen: HashSet::new(),
            closure: Vec::new(),
            data_root: ConceptId(0),
            recipient_root: ConceptId(1),
        };
        graph.data_root = graph.push(ConceptKind::Data.root_name(), ConceptKind::Data, Vec::new());
        graph.recipient_root = graph.push(
            ConceptKind::Recipient.root_name(),
            ConceptKind::Recipient,
            Vec::new(),
        );
        graph
    }

    fn push(&mut self, name: &str, kind: ConceptKind, parents: Vec<ConceptId>) -> ConceptId {
        let id = ConceptId(self.concepts.len() as u32);
        let mut ancestors: HashSet<ConceptId> = HashSet::with_capacity(parents.len() + 1);
        ancestors.insert(id);
        for p in &parents {
            ancestors.extend(self.closure[p.index()].iter().copied());
        }
        self.concepts.push(Concept {
            name: name.to_owned(),
            kind,
            parents,
        });
        self.by_name.insert(name.to_owned(), id);
        self.group.push(id);
        self.members.insert(id, vec![id]);
        self.closure.push(ancestors);
        id
    }

    pub fn root(&self, kind: ConceptKind) -> ConceptId {
        match kind {
            ConceptKind::Data => self.data_root,
            ConceptKind::Recipient => self.recipient_root,
        }
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn lookup(&self, name: &str) -> Option<ConceptId> {
        self.by_name.get(name).copied()
    }

    /// Looks up `name` and checks that it has the expected kind.
    pub fn resolve(&self, name: &str, kind: ConceptKind) -> Result<ConceptId, OntologyError> {
        let id = self
            .lookup(name)
            .ok_or_else(|| OntologyError::UnknownConcept(name.to_owned()))?;
        let actual = self.kind(id);
        if actual != kind {
            return Err(OntologyError::KindMismatch {
                name: name.to_owned(),
                expected: kind,
                actual,
            });
        }
        Ok(id)
    }

    pub fn name(&self, id: ConceptId) -> &str {
        &self.concepts[id.index()].name
    }

    pub fn kind(&self, id: ConceptId) -> ConceptKind {
        self.concepts[id.index()].kind
    }

    pub fn parents(&self, id: ConceptId) -> &[ConceptId] {
        &self.concepts[id.index()].parents
    }

    /// Members of `id`'s equivalence group, `id` included.
    pub fn equivalents(&self, id: ConceptId) -> &[ConceptId] {
        &self.members[&self.group[id.index()]]
    }

    pub fn ids(&self) -> impl Iterator<Item = ConceptId> + '_ {
        (0..self.concepts.len() as u32).map(ConceptId)
    }

    pub fn disjoint_pairs(&self) -> &[(ConceptId, ConceptId)] {
        &self.disjoint
    }

    /// Declares a concept, or adds parents to an existing one.
    ///
    /// An empty parent list means "directly under the kind's root" for a new
    /// concept and is a no-op for an existing one.
    pub fn declare_concept(
        &mut self,
        name: &str,
        kind: ConceptKind,
        parents: &[&str],
    ) -> Result<ConceptId, OntologyError> {
        let mut parent_ids = Vec::with_capacity(parents.len());
        for parent in parents {
            let pid = self.resolve(parent, kind)?;
            if !parent_ids.contains(&pid) {
                parent_ids.push(pid);
            }
        }

        match self.lookup(name) {
            None => {
                if parent_ids.is_empty() {
                    parent_ids.push(self.root(kind));
                }
                Ok(self.push(name, kind, parent_ids))
            }
            Some(id) => {
                let actual = self.kind(id);
                if actual != kind {
                    return Err(OntologyError::KindMismatch {
                        name: name.to_owned(),
                        expected: kind,
                        actual,
                    });
                }
                if id == self.root(kind) {
                    if parent_ids.is_empty() {
                        return Ok(id);
                    }
                    return Err(OntologyError::RootRedeclared(name.to_owned()));
                }
                let existing = &mut self.concepts[id.index()].parents;
                let before = existing.len();
                for pid in parent_ids {
                    if pid != id && !existing.contains(&pid) {
                        existing.push(pid);
                    }
                }
                if existing.len() != before {
                    self.rebuild_closure();
                }
                Ok(id)
            }
        }
    }

    pub fn declare_equivalent(&mut self, a: &str, b: &str) -> Result<(), OntologyError> {
        let a_id = self
            .lookup(a)
            .ok_or_else(|| OntologyError::UnknownConcept(a.to_owned()))?;
        let b_id = self.resolve(b, self.kind(a_id))?;
        let (ga, gb) = (self.group[a_id.index()], self.group[b_id.index()]);
        if ga == gb {
            return Ok(());
        }
        if self.are_disjoint(a_id, b_id)
            && !self.is_unsatisfiable(a_id)
            && !self.is_unsatisfiable(b_id)
        {
            return Err(OntologyError::EquivalentDisjoint {
                a: a.to_owned(),
                b: b.to_owned(),
            });
        }
        let (keep, absorb) = if ga < gb { (ga, gb) } else { (gb, ga) };
        let moved = self.members.remove(&absorb).unwrap_or_default();
        for m in &moved {
            self.group[m.index()] = keep;
        }
        self.members.entry(keep).or_default().extend(moved);
        self.rebuild_closure();
        Ok(())
    }

    pub fn declare_disjoint(&mut self, names: &[&str]) -> Result<(), OntologyError> {
        if names.len() < 2 {
            return Err(OntologyError::TooFewDisjoint);
        }
        let first = self
            .lookup(names[0])
            .ok_or_else(|| OntologyError::UnknownConcept(names[0].to_owned()))?;
        let kind = self.kind(first);
        let ids = names
            .iter()
            .map(|n| self.resolve(n, kind))
            .collect::<Result<Vec<_>, _>>()?;

        let mut pairs = Vec::new();
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len() {
                let (a, b) = (ids[i], ids[j]);
                if self.group[a.index()] == self.group[b.index()] {
                    return Err(OntologyError::SelfDisjoint(names[i].to_owned()));
                }
                let satisfiable = !self.is_unsatisfiable(a) && !self.is_unsatisfiable(b);
                if satisfiable {
                    if self.subsumes(a, b) {
                        return Err(OntologyError::DisjointRelated {
                            general: names[i].to_owned(),
                            specific: names[j].to_owned(),
                        });
                    }
                    if self.subsumes(b, a) {
                        return Err(OntologyError::DisjointRelated {
                            general: names[j].to_owned(),
                            specific: names[i].to_owned(),
                        });
                    }
                }
                pairs.push(if a < b { (a, b) } else { (b, a) });
            }
        }
        for pair in pairs {
            if self.disjoint_seen.insert(pair) {
                self.disjoint.push(pair);
            }
        }
        Ok(())
    }

    /// True iff `specific` reaches `general` through parent edges, modulo
    /// equivalence. Reflexive; false across kinds.
    pub fn subsumes(&self, general: ConceptId, specific: ConceptId) -> bool {
        self.closure[specific.index()].contains(&general)
    }

    /// True iff some declared disjoint pair covers `a` and `b` from above.
    /// An unsatisfiable concept is disjoint from every concept of its kind.
    pub fn are_disjoint(&self, a: ConceptId, b: ConceptId) -> bool {
        if self.kind(a) != self.kind(b) {
            return false;
        }
        if self.is_unsatisfiable(a) || self.is_unsatisfiable(b) {
            return true;
        }
        let (above_a, above_b) = (&self.closure[a.index()], &self.closure[b.index()]);
        self.disjoint.iter().any(|(x, y)| {
            (above_a.contains(x) && above_b.contains(y))
                || (above_a.contains(y) && above_b.contains(x))
        })
    }

    /// True iff `a` is subsumed by both members of a declared disjoint pair.
    pub fn is_unsatisfiable(&self, a: ConceptId) -> bool {
        let above = &self.closure[a.index()];
        self.disjoint
            .iter()
            .any(|(x, y)| above.contains(x) && above.contains(y))
    }

    fn rebuild_closure(&mut self) {
        let n = self.concepts.len();
        let mut closure = Vec::with_capacity(n);
        let mut queue = VecDeque::new();
        for start in 0..n {
            let mut seen: HashSet<ConceptId> = HashSet::new();
            queue.clear();
            queue.push_back(ConceptId(start as u32));
            while let Some(c) = queue.pop_front() {
                if !seen.insert(c) {
                    continue;
                }
                for &m in &self.members[&self.group[c.index()]] {
                    if !seen.contains(&m) {
                        queue.push_back(m);
                    }
                }
                for &p in &self.concepts[c.index()].parents {
                    if !seen.contains(&p) {
                        queue.push_back(p);
                    }
                }
            }
            closure.push(seen);
        }
        self.closure = closure;
    }
}
