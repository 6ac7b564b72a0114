//! Brute-force reference semantics over a finite horizon.
//!
//! Everything here is written from scratch over plain names and integers:
//! subsumption by expanding an edge list to a fixpoint, consent regions by
//! a double loop over the four grant/withdrawal shapes. Nothing is shared
//! with `consent-core`, so agreement between the two is evidence rather than
//! tautology.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DATA_ROOT: &str = "Data";
pub const RECIPIENT_ROOT: &str = "Recipient";

pub const MAX_CONCEPTS: usize = 6;
pub const MAX_CONSENTS: usize = 4;
pub const MAX_STEPS: u32 = 10;
pub const MAX_QUERIES: usize = 20;
pub const SUBJECTS: [&str; 2] = ["alice", "bob"];
pub const SECOND_PARENT_PROBABILITY: f64 = 0.25;
pub const EQUIVALENCE_PROBABILITY: f64 = 0.2;
pub const DISJOINT_PROBABILITY: f64 = 0.3;
pub const WITHDRAWAL_PROBABILITY: f64 = 0.6;

/// Concept facts as raw name pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Facts {
    /// `(specific, general)`
    pub edges: Vec<(String, String)>,
    pub equivalences: Vec<(String, String)>,
    pub disjoint: Vec<(String, String)>,
}

/// `(data, subject, recipient, g, retro_grant, Some((w, retro_withdraw)))`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsentTuple {
    pub data: String,
    pub subject: String,
    pub recipient: String,
    pub granted: u32,
    pub grant_retro: bool,
    pub withdrawal: Option<(u32, bool)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryAction {
    Collect,
    Access,
}

/// A query at step `access_at`. Access queries cover collection steps
/// `from..to`; collect queries ignore both and ask about `access_at` itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryTuple {
    pub action: QueryAction,
    pub data: String,
    pub subject: String,
    pub recipient: String,
    pub from: u32,
    pub to: u32,
    pub access_at: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteScenario {
    pub horizon: u32,
    /// `(specific, general)` among data concepts.
    pub data_edges: Vec<(String, String)>,
    pub recipient_edges: Vec<(String, String)>,
    pub equivalences: Vec<(String, String)>,
    pub disjoint: Vec<(String, String)>,
    pub consents: Vec<ConsentTuple>,
    pub queries: Vec<QueryTuple>,
}

impl FiniteScenario {
    pub fn facts(&self) -> Facts {
        Facts {
            edges: self
                .data_edges
                .iter()
                .chain(&self.recipient_edges)
                .cloned()
                .collect(),
            equivalences: self.equivalences.clone(),
            disjoint: self.disjoint.clone(),
        }
    }
}

/// For every name, the set of names above it (itself included), found by
/// repeatedly merging each name's set with the sets of the names in it
/// until nothing grows.
pub fn oracle_closure(facts: &Facts) -> BTreeMap<String, BTreeSet<String>> {
    let mut above: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut link = |a: &String, b: &String| {
        above.entry(b.clone()).or_default().insert(b.clone());
        let up = above.entry(a.clone()).or_default();
        up.insert(a.clone());
        up.insert(b.clone());
    };
    for (a, b) in &facts.edges {
        link(a, b);
    }
    for (a, b) in &facts.equivalences {
        link(a, b);
        link(b, a);
    }
    loop {
        let mut changed = false;
        let names: Vec<String> = above.keys().cloned().collect();
        for name in &names {
            let mut merged = above[name].clone();
            for mid in &above[name] {
                merged.extend(above[mid].iter().cloned());
            }
            if merged.len() != above[name].len() {
                above.insert(name.clone(), merged);
                changed = true;
            }
        }
        if !changed {
            return above;
        }
    }
}

fn below(closure: &BTreeMap<String, BTreeSet<String>>, general: &str, specific: &str) -> bool {
    general == specific || closure.get(specific).is_some_and(|up| up.contains(general))
}

fn unsatisfiable(facts: &Facts, closure: &BTreeMap<String, BTreeSet<String>>, name: &str) -> bool {
    facts
        .disjoint
        .iter()
        .any(|(a, b)| below(closure, a, name) && below(closure, b, name))
}

pub fn oracle_subsumes(facts: &Facts, general: &str, specific: &str) -> bool {
    below(&oracle_closure(facts), general, specific)
}

/// A name is unsatisfiable when it sits below both sides of some disjoint pair.
pub fn oracle_unsatisfiable(facts: &Facts, name: &str) -> bool {
    unsatisfiable(facts, &oracle_closure(facts), name)
}

/// Every `(t_c, t_a)` in `1..=horizon` squared that the consent lets through
/// for access.
pub fn oracle_region(consent: &ConsentTuple, horizon: u32) -> BTreeSet<(u32, u32)> {
    let g = consent.granted;
    // no withdrawal behaves like one just past the horizon
    let (w, retro_withdraw) = consent.withdrawal.unwrap_or((horizon + 1, false));
    let mut region = BTreeSet::new();
    for t_c in 1..=horizon {
        for t_a in 1..=horizon {
            if t_a < t_c {
                continue;
            }
            let inside = match (consent.grant_retro, retro_withdraw) {
                // data collected while the consent stood, accessed any time after
                (false, false) => g <= t_c && t_c < w,
                // also data collected before the grant, but accessed only once granted
                (true, false) => t_c < w && g <= t_a,
                // data collected while the consent stood, accessed only while it stood
                (false, true) => g <= t_c && t_c < w && t_a < w,
                // any data, accessed only while the consent stood
                (true, true) => g <= t_a && t_a < w,
            };
            if inside {
                region.insert((t_c, t_a));
            }
        }
    }
    region
}

pub fn oracle_check(scenario: &FiniteScenario, query: &QueryTuple) -> bool {
    let facts = scenario.facts();
    let closure = oracle_closure(&facts);
    if unsatisfiable(&facts, &closure, &query.data)
        || unsatisfiable(&facts, &closure, &query.recipient)
    {
        return false;
    }
    let relevant: Vec<BTreeSet<(u32, u32)>> = scenario
        .consents
        .iter()
        .filter(|c| {
            c.subject == query.subject
                && below(&closure, &c.data, &query.data)
                && below(&closure, &c.recipient, &query.recipient)
        })
        .map(|c| oracle_region(c, scenario.horizon))
        .collect();
    let pairs: Vec<(u32, u32)> = match query.action {
        QueryAction::Collect => vec![(query.access_at, query.access_at)],
        QueryAction::Access => (query.from..query.to)
            .map(|t_c| (t_c, query.access_at))
            .collect(),
    };
    pairs
        .iter()
        .all(|pair| relevant.iter().any(|region| region.contains(pair)))
}

fn pick<'a>(rng: &mut ChaCha8Rng, names: &'a [String]) -> &'a String {
    &names[rng.random_range(0..names.len())]
}

fn grow(
    rng: &mut ChaCha8Rng,
    prefix: &str,
    root: &str,
    count: usize,
) -> (Vec<String>, Vec<(String, String)>) {
    let mut names = vec![root.to_owned()];
    let mut edges = Vec::new();
    for i in 1..=count {
        let name = format!("{prefix}{i}");
        let parent = pick(rng, &names).clone();
        if rng.random_bool(SECOND_PARENT_PROBABILITY) {
            let other = pick(rng, &names).clone();
            if other != parent && other != root {
                edges.push((name.clone(), other));
            }
        }
        edges.push((name.clone(), parent));
        names.push(name);
    }
    (names, edges)
}

/// A small random scenario, fully determined by `seed`.
pub fn random_scenario(seed: u64) -> FiniteScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = rng.random_range(1..=MAX_STEPS);
    let data_count = rng.random_range(1..MAX_CONCEPTS);
    let recipient_count = rng.random_range(0..=(MAX_CONCEPTS - data_count));
    let (data, data_edges) = grow(&mut rng, "D", DATA_ROOT, data_count);
    let (recipients, recipient_edges) = grow(&mut rng, "R", RECIPIENT_ROOT, recipient_count);

    let mut equivalences = Vec::new();
    for names in [&data[1..], &recipients[1..]] {
        if names.len() >= 2 && rng.random_bool(EQUIVALENCE_PROBABILITY) {
            let a = pick(&mut rng, names).clone();
            let b = pick(&mut rng, names).clone();
            if a != b {
                equivalences.push((a, b));
            }
        }
    }

    let mut disjoint = Vec::new();
    let facts = Facts {
        edges: data_edges.iter().chain(&recipient_edges).cloned().collect(),
        equivalences: equivalences.clone(),
        disjoint: Vec::new(),
    };
    let closure = oracle_closure(&facts);
    let related = |a: &String, b: &String| below(&closure, a, b) || below(&closure, b, a);
    for names in [&data[1..], &recipients[1..]] {
        if names.len() >= 2 && rng.random_bool(DISJOINT_PROBABILITY) {
            let a = pick(&mut rng, names).clone();
            let b = pick(&mut rng, names).clone();
            if !related(&a, &b) {
                disjoint.push((a, b));
            }
        }
    }

    let consents = (0..rng.random_range(0..=MAX_CONSENTS))
        .map(|_| {
            let granted = rng.random_range(1..=horizon);
            let withdrawal = rng
                .random_bool(WITHDRAWAL_PROBABILITY)
                .then(|| (rng.random_range(granted..=horizon), rng.random_bool(0.5)));
            ConsentTuple {
                data: pick(&mut rng, &data).clone(),
                subject: SUBJECTS[rng.random_range(0..SUBJECTS.len())].to_owned(),
                recipient: pick(&mut rng, &recipients).clone(),
                granted,
                grant_retro: rng.random_bool(0.5),
                withdrawal,
            }
        })
        .collect();

    let queries = (0..rng.random_range(1..=MAX_QUERIES))
        .map(|_| {
            let access_at = rng.random_range(1..=horizon);
            let from = rng.random_range(1..=access_at);
            let to = rng.random_range(from + 1..=access_at + 1);
            QueryTuple {
                action: if rng.random_bool(0.5) {
                    QueryAction::Collect
                } else {
                    QueryAction::Access
                },
                data: pick(&mut rng, &data).clone(),
                subject: SUBJECTS[rng.random_range(0..SUBJECTS.len())].to_owned(),
                recipient: pick(&mut rng, &recipients).clone(),
                from,
                to,
                access_at,
            }
        })
        .collect();

    FiniteScenario {
        horizon,
        data_edges,
        recipient_edges,
        equivalences,
        disjoint,
        consents,
        queries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges(pairs: &[(&str, &str)]) -> Facts {
        Facts {
            edges: pairs
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            ..Facts::default()
        }
    }

    fn consent(g: u32, retro: bool, w: Option<(u32, bool)>) -> ConsentTuple {
        ConsentTuple {
            data: "D".into(),
            subject: "s".into(),
            recipient: "R".into(),
            granted: g,
            grant_retro: retro,
            withdrawal: w,
        }
    }

    #[test]
    fn overlapping_hierarchy() {
        let f = edges(&[
            ("RealTimeLocation", "Data"),
            ("DrivingRoute", "RealTimeLocation"),
            ("WalkingRoute", "RealTimeLocation"),
        ]);
        assert!(oracle_subsumes(&f, "RealTimeLocation", "WalkingRoute"));
        assert!(oracle_subsumes(&f, "Data", "WalkingRoute"));
        assert!(!oracle_subsumes(&f, "DrivingRoute", "WalkingRoute"));
        assert!(oracle_subsumes(&f, "x", "x"));
    }

    #[test]
    fn equivalence_goes_both_ways() {
        let mut f = edges(&[("A", "Data"), ("B", "Data"), ("C", "B")]);
        f.equivalences.push(("A".into(), "B".into()));
        assert!(oracle_subsumes(&f, "A", "C"));
        assert!(oracle_subsumes(&f, "B", "A"));
        f.disjoint.push(("C".into(), "A".into()));
        assert!(oracle_unsatisfiable(&f, "C"));
        assert!(!oracle_unsatisfiable(&f, "B"));
    }

    #[test]
    fn region_examples() {
        let set = |v: &[(u32, u32)]| v.iter().copied().collect::<BTreeSet<_>>();
        assert_eq!(
            oracle_region(&consent(1, false, None), 2),
            set(&[(1, 1), (1, 2), (2, 2)])
        );
        assert!(oracle_region(&consent(1, true, Some((1, true))), 3).is_empty());
        let expected: BTreeSet<_> = (2..=3)
            .flat_map(|t_c| (t_c..=5).map(move |t_a| (t_c, t_a)))
            .collect();
        assert_eq!(
            oracle_region(&consent(2, false, Some((4, false))), 5),
            expected
        );
        assert_eq!(
            oracle_region(&consent(2, true, None), 3),
            set(&[(1, 2), (2, 2), (1, 3), (2, 3), (3, 3)])
        );
        assert_eq!(
            oracle_region(&consent(1, false, Some((2, true))), 3),
            set(&[(1, 1)])
        );
    }

    #[test]
    fn no_consents_deny_everything() {
        for seed in 0..50 {
            let mut s = random_scenario(seed);
            s.consents.clear();
            assert!(s.queries.iter().all(|q| !oracle_check(&s, q)));
        }
    }

    #[test]
    fn random_scenarios_respect_bounds() {
        for seed in 0..200 {
            let s = random_scenario(seed);
            assert_eq!(s, random_scenario(seed));
            assert!(s.horizon >= 1 && s.horizon <= MAX_STEPS);
            assert!(s.data_edges.len() + s.recipient_edges.len() >= 1);
            let concepts: BTreeSet<&String> = s
                .data_edges
                .iter()
                .chain(&s.recipient_edges)
                .map(|(a, _)| a)
                .collect();
            assert!(concepts.len() <= MAX_CONCEPTS);
            assert!(s.consents.len() <= MAX_CONSENTS);
            assert!(!s.queries.is_empty() && s.queries.len() <= MAX_QUERIES);
            for c in &s.consents {
                assert!(c.granted <= s.horizon);
                if let Some((w, _)) = c.withdrawal {
                    assert!(c.granted <= w && w <= s.horizon);
                }
            }
            for q in &s.queries {
                assert!(1 <= q.from && q.from < q.to && q.to <= q.access_at + 1);
            }
        }
    }
}
