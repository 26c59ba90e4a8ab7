//! Conjunctive MAP query evaluation over fact sets.
//!
//! Patterns match a quad's subject, predicate and object; the author is
//! never consulted. Answers have set semantics.

use std::collections::{BTreeMap, BTreeSet};

use crate::access::policy_view;
use crate::error::{Error, Result};
use crate::model::{Atom, Binding, FactSet, MapQuery, Pattern, Principal, Quad, Term, Variable};
use crate::store::{Hash, Repo};

/// Largest fact set accepted by [`brute_force_eval`].
pub const ORACLE_MAX_QUADS: usize = 64;
/// Largest pattern count accepted by [`brute_force_eval`].
pub const ORACLE_MAX_PATTERNS: usize = 4;

/// Whether pattern term `pt` can stand for `actual` given `binding` and
/// the bindings made earlier in the same pattern.
fn term_fits<'a>(
    pt: &'a Term,
    actual: TermRef<'a>,
    binding: &Binding,
    local: &mut Vec<(&'a Variable, TermRef<'a>)>,
) -> bool {
    match pt {
        Term::Variable(v) => {
            if let Some(bound) = binding.get(v) {
                return actual.equals(bound);
            }
            match local.iter().find(|(lv, _)| *lv == v) {
                Some((_, seen)) => seen.same(actual),
                None => {
                    local.push((v, actual));
                    true
                }
            }
        }
        ground => actual.equals(ground),
    }
}

#[derive(Clone, Copy)]
enum TermRef<'a> {
    Atom(&'a Atom),
    Other(&'a Term),
}

impl TermRef<'_> {
    fn equals(self, t: &Term) -> bool {
        match (self, t) {
            (TermRef::Atom(a), Term::Atom(b)) => a == b,
            (TermRef::Atom(_), _) => false,
            (TermRef::Other(a), b) => a == b,
        }
    }

    fn same(self, other: TermRef<'_>) -> bool {
        match other {
            TermRef::Atom(b) => {
                matches!(self, TermRef::Atom(a) if a == b)
                    || matches!(self, TermRef::Other(Term::Atom(a)) if a == b)
            }
            TermRef::Other(t) => self.equals(t),
        }
    }

    fn to_term(self) -> Term {
        match self {
            TermRef::Atom(a) => Term::Atom(a.clone()),
            TermRef::Other(t) => t.clone(),
        }
    }
}

/// Extends `binding` so that `pattern` under it equals the quad's triple.
fn unify(pattern: &Pattern, quad: &Quad, binding: &Binding) -> Option<Binding> {
    let actual = [
        TermRef::Atom(quad.subject()),
        TermRef::Atom(quad.predicate()),
        TermRef::Other(quad.object()),
    ];
    let mut local = Vec::new();
    for (pt, at) in pattern.terms().into_iter().zip(actual) {
        if !term_fits(pt, at, binding, &mut local) {
            return None;
        }
    }
    let mut out = binding.clone();
    for (v, t) in local {
        out.insert(v.clone(), t.to_term());
    }
    Some(out)
}

/// Whether `p` matches the quad's subject, predicate and object.
pub fn pattern_matches(p: &Pattern, q: &Quad) -> bool {
    unify(p, q, &Binding::new()).is_some()
}

/// All bindings of `p`'s variables that turn it into some quad's triple.
pub fn match_pattern(fs: &FactSet, p: &Pattern) -> BTreeSet<Binding> {
    let empty = Binding::new();
    fs.iter().filter_map(|q| unify(p, q, &empty)).collect()
}

/// Left-to-right nested-loop join, projected onto the query's select list.
pub fn eval_map(fs: &FactSet, q: &MapQuery) -> BTreeSet<Binding> {
    let mut partial = BTreeSet::from([Binding::new()]);
    for pattern in q.patterns() {
        let mut next = BTreeSet::new();
        for b in &partial {
            next.extend(fs.iter().filter_map(|quad| unify(pattern, quad, b)));
        }
        if next.is_empty() {
            return BTreeSet::new();
        }
        partial = next;
    }
    partial.iter().map(|b| b.project(q.select())).collect()
}

/// Reference evaluator: tries every assignment of quads to patterns.
///
/// Shares no code with [`eval_map`] so the two can be compared.
pub fn brute_force_eval(fs: &FactSet, q: &MapQuery) -> Result<BTreeSet<Binding>> {
    let k = q.patterns().len();
    if fs.len() > ORACLE_MAX_QUADS || k > ORACLE_MAX_PATTERNS {
        return Err(Error::OracleTooLarge {
            quads: fs.len(),
            patterns: k,
        });
    }
    let quads: Vec<&Quad> = fs.iter().collect();
    let mut out = BTreeSet::new();
    if quads.is_empty() {
        return Ok(out);
    }
    let mut choice = vec![0usize; k];
    loop {
        let mut assignment: BTreeMap<&Variable, Term> = BTreeMap::new();
        let mut consistent = true;
        'tuple: for (pattern, &qi) in q.patterns().iter().zip(&choice) {
            let quad = quads[qi];
            let actual = [
                Term::Atom(quad.subject().clone()),
                Term::Atom(quad.predicate().clone()),
                quad.object().clone(),
            ];
            for (pt, at) in pattern.terms().into_iter().zip(actual) {
                let ok = match pt {
                    Term::Variable(v) => assignment.entry(v).or_insert_with(|| at.clone()) == &at,
                    ground => *ground == at,
                };
                if !ok {
                    consistent = false;
                    break 'tuple;
                }
            }
        }
        if consistent {
            out.insert(
                q.select()
                    .iter()
                    .map(|v| (v.clone(), assignment[v].clone()))
                    .collect(),
            );
        }
        // odometer increment over |fs|^k tuples
        let mut pos = 0;
        loop {
            if pos == k {
                return Ok(out);
            }
            choice[pos] += 1;
            if choice[pos] < quads.len() {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}

/// Change in a query's answers between two fact sets.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Delta {
    pub added: BTreeSet<Binding>,
    pub removed: BTreeSet<Binding>,
}

impl Delta {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty()
    }
}

pub fn map_delta(old: &FactSet, new: &FactSet, q: &MapQuery) -> Delta {
    let before = eval_map(old, q);
    let after = eval_map(new, q);
    Delta {
        added: after.difference(&before).cloned().collect(),
        removed: before.difference(&after).cloned().collect(),
    }
}

/// Grounds `p` with `binding` and stamps it with `author`.
pub fn substitute(p: &Pattern, binding: &Binding, author: &Principal) -> Result<Quad> {
    let ground = |t: &Term| -> Result<Term> {
        match t {
            Term::Variable(v) => binding
                .get(v)
                .cloned()
                .ok_or_else(|| Error::UnboundVariable(v.as_str().to_string())),
            t => Ok(t.clone()),
        }
    };
    let atom = |t: Term, pos: &str| -> Result<Atom> {
        match t {
            Term::Atom(a) => Ok(a),
            other => Err(Error::InvalidTerm(format!(
                "{other} cannot be a quad {pos}"
            ))),
        }
    };
    Quad::new(
        atom(ground(p.subject())?, "subject")?,
        atom(ground(p.predicate())?, "predicate")?,
        ground(p.object())?,
        author.clone(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubscriptionId(u64);

impl std::fmt::Display for SubscriptionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "sub-{}", self.0)
    }
}

/// A standing query held by one principal.
#[derive(Clone, Debug)]
pub struct Subscription {
    pub id: SubscriptionId,
    pub query: MapQuery,
    pub principal: Principal,
    pub last_commit: Option<Hash>,
}

/// Per-session registry of standing queries. Deltas are pulled, not pushed:
/// each [`Subscriptions::poll`] compares the principal's view at the last
/// polled commit against the view at the new one.
#[derive(Debug, Default)]
pub struct Subscriptions {
    next: u64,
    subs: BTreeMap<SubscriptionId, Subscription>,
}

impl Subscriptions {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscribe(
        &mut self,
        query: MapQuery,
        principal: Principal,
        since: Option<Hash>,
    ) -> SubscriptionId {
        let id = SubscriptionId(self.next);
        self.next += 1;
        self.subs.insert(
            id,
            Subscription {
                id,
                query,
                principal,
                last_commit: since,
            },
        );
        id
    }

    pub fn get(&self, id: SubscriptionId) -> Option<&Subscription> {
        self.subs.get(&id)
    }

    pub fn unsubscribe(&mut self, id: SubscriptionId) -> Option<Subscription> {
        self.subs.remove(&id)
    }

    /// Delta of the subscription's answers up to `head`, then advances it.
    pub fn poll(&mut self, id: SubscriptionId, repo: &Repo, head: &Hash) -> Result<Delta> {
        let sub = self
            .subs
            .get_mut(&id)
            .ok_or_else(|| Error::MalformedQuery(format!("unknown subscription {id}")))?;
        let view_at = |commit: &Hash| -> Result<FactSet> {
            Ok(policy_view(
                &repo.resolve_facts(commit)?,
                &sub.principal,
                repo.owner(),
            ))
        };
        let old = match &sub.last_commit {
            Some(c) => view_at(c)?,
            None => FactSet::new(),
        };
        let new = view_at(head)?;
        let delta = map_delta(&old, &new, &sub.query);
        sub.last_commit = Some(*head);
        Ok(delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_query;

    fn quad(s: &str, p: &str, o: &str, a: &str) -> Quad {
        Quad::parse_parts(s, p, o, a).unwrap()
    }

    fn facts(qs: &[(&str, &str, &str, &str)]) -> FactSet {
        qs.iter().map(|&(s, p, o, a)| quad(s, p, o, a)).collect()
    }

    fn binding(pairs: &[(&str, &str)]) -> Binding {
        pairs
            .iter()
            .map(|&(v, t)| (Variable::new(v).unwrap(), Term::decode(t).unwrap()))
            .collect()
    }

    #[test]
    fn match_single() {
        let fs = facts(&[("alice", "follows", "bob", "alice")]);
        let p = Pattern::parse("?x <follows> <bob>").unwrap();
        assert_eq!(
            match_pattern(&fs, &p),
            BTreeSet::from([binding(&[("x", "<alice>")])])
        );
        assert!(match_pattern(&FactSet::new(), &p).is_empty());
    }

    #[test]
    fn match_wildcard_counts_quads() {
        let fs = facts(&[
            ("a", "p", "b", "x"),
            ("a", "p", "c", "x"),
            ("d", "q", "\"lit\"", "y"),
        ]);
        let p = Pattern::parse("?s ?p ?o").unwrap();
        assert_eq!(match_pattern(&fs, &p).len(), 3);
    }

    #[test]
    fn match_repeated_variable() {
        let fs = facts(&[
            ("a", "p", "a", "x"),
            ("a", "p", "b", "x"),
            ("b", "p", "\"b\"", "x"),
        ]);
        let p = Pattern::parse("?v <p> ?v").unwrap();
        assert_eq!(
            match_pattern(&fs, &p),
            BTreeSet::from([binding(&[("v", "<a>")])])
        );
        let q = crate::model::parse_query("?v ?w ?v").unwrap();
        assert_eq!(eval_map(&fs, &q), brute_force_eval(&fs, &q).unwrap());
        assert_eq!(eval_map(&fs, &q).len(), 1);
    }

    #[test]
    fn ground_pattern_yields_empty_binding() {
        let fs = facts(&[("a", "b", "c", "x")]);
        let hit = Pattern::parse("<a> <b> <c>").unwrap();
        let miss = Pattern::parse("<a> <b> <d>").unwrap();
        assert_eq!(match_pattern(&fs, &hit), BTreeSet::from([Binding::new()]));
        assert!(match_pattern(&fs, &miss).is_empty());
    }

    #[test]
    fn eval_filter_join_project() {
        let fs = facts(&[("p1", "type", "Photo", "a"), ("x", "ssn", "\"9\"", "a")]);
        let q = parse_query("?s <type> <Photo>").unwrap();
        assert_eq!(
            eval_map(&fs, &q),
            BTreeSet::from([binding(&[("s", "<p1>")])])
        );

        let fs = facts(&[("p1", "type", "Photo", "a"), ("p1", "owner", "alice", "a")]);
        let q = parse_query("?s <type> <Photo> ; ?s <owner> ?o").unwrap();
        let expected = BTreeSet::from([binding(&[("s", "<p1>"), ("o", "<alice>")])]);
        assert_eq!(eval_map(&fs, &q), expected);
        assert_eq!(brute_force_eval(&fs, &q).unwrap(), expected);

        let q = q.with_select(vec![Variable::new("o").unwrap()]).unwrap();
        assert_eq!(
            eval_map(&fs, &q),
            BTreeSet::from([binding(&[("o", "<alice>")])])
        );
    }

    #[test]
    fn projection_collapses_duplicates() {
        let fs = facts(&[("p1", "owner", "alice", "a"), ("p2", "owner", "alice", "a")]);
        let q = parse_query("?s <owner> ?o")
            .unwrap()
            .with_select(vec![Variable::new("o").unwrap()])
            .unwrap();
        assert_eq!(eval_map(&fs, &q).len(), 1);
    }

    #[test]
    fn oracle_edge_cases() {
        let q = parse_query("<a> <b> <c>").unwrap();
        assert!(brute_force_eval(&FactSet::new(), &q).unwrap().is_empty());
        let fs = facts(&[("a", "b", "c", "x")]);
        assert_eq!(
            brute_force_eval(&fs, &q).unwrap(),
            BTreeSet::from([Binding::new()])
        );
        let big: FactSet = (0..65)
            .map(|i| quad(&format!("s{i}"), "p", "o", "x"))
            .collect();
        assert!(matches!(
            brute_force_eval(&big, &q),
            Err(Error::OracleTooLarge { quads: 65, .. })
        ));
        let five =
            parse_query("?a <p> ?b ; ?b <p> ?c ; ?c <p> ?d ; ?d <p> ?e ; ?e <p> ?f").unwrap();
        assert!(matches!(
            brute_force_eval(&fs, &five),
            Err(Error::OracleTooLarge { patterns: 5, .. })
        ));
    }

    #[test]
    fn delta_examples() {
        let q = parse_query("?s <type> <Photo>").unwrap();
        let new = facts(&[("p1", "type", "Photo", "a")]);
        let d = map_delta(&FactSet::new(), &new, &q);
        assert_eq!(d.added, BTreeSet::from([binding(&[("s", "<p1>")])]));
        assert!(d.removed.is_empty());
        assert!(map_delta(&new, &new, &q).is_empty());
    }

    #[test]
    fn substitute_examples() {
        let alice = Principal::new("alice").unwrap();
        let p = Pattern::parse("?s <type> <Photo>").unwrap();
        assert_eq!(
            substitute(&p, &binding(&[("s", "<p1>")]), &alice).unwrap(),
            quad("p1", "type", "Photo", "alice")
        );
        let g = Pattern::parse("<a> <b> \"c\"").unwrap();
        assert_eq!(
            substitute(&g, &Binding::new(), &alice).unwrap(),
            quad("a", "b", "\"c\"", "alice")
        );
        assert!(matches!(
            substitute(&p, &Binding::new(), &alice),
            Err(Error::UnboundVariable(v)) if v == "s"
        ));
        let lit_subject = Pattern::parse("?s <p> <o>").unwrap();
        assert!(substitute(&lit_subject, &binding(&[("s", "\"x\"")]), &alice).is_err());
    }

    #[test]
    fn subscriptions_poll_deltas() {
        let dir = tempfile::tempdir().unwrap();
        let alice = Principal::new("alice").unwrap();
        let repo = Repo::create_layout(dir.path().join("r"), &alice).unwrap();
        let c0 = repo
            .create_commit(&[], &FactSet::new(), &alice, "0")
            .unwrap();
        let fs1 = facts(&[("p1", "type", "Photo", "alice")]);
        let c1 = repo.create_commit(&[c0], &fs1, &alice, "1").unwrap();

        let mut subs = Subscriptions::new();
        let q = parse_query("?s <type> <Photo>").unwrap();
        let id = subs.subscribe(q, alice.clone(), Some(c0));
        let d = subs.poll(id, &repo, &c1).unwrap();
        assert_eq!(d.added.len(), 1);
        assert_eq!(subs.get(id).unwrap().last_commit, Some(c1));
        assert!(subs.poll(id, &repo, &c1).unwrap().is_empty());
        assert!(subs.unsubscribe(id).is_some());
        assert!(subs.poll(id, &repo, &c1).is_err());
    }
}
