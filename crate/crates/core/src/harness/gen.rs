//! Random instance generators. Vocabularies are kept small so that random
//! patterns and random quads actually meet.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::access::{Mode, Policy, AC_PUBLIC};
use crate::harness::oracle::GrantSpec;
use crate::model::{Atom, FactSet, MapQuery, Pattern, Principal, Quad, Term, Variable};

pub const SUBJECTS: &[&str] = &["s0", "s1", "s2", "s3", "s4", "s5"];
pub const PREDICATES: &[&str] = &["type", "p0", "p1", "p2", "ssn"];
pub const OBJECTS: &[&str] = &["o0", "o1", "o2", "Photo", "s0", "s1"];
pub const LITERALS: &[&str] = &["l0", "l1", "say \"hi\"", "x;y"];
pub const VARIABLES: &[&str] = &["x", "y", "z", "w"];

fn atom(s: &str) -> Atom {
    Atom::new(s).expect("generator vocabulary is valid")
}

pub fn principal(s: &str) -> Principal {
    Principal::new(s).expect("generator vocabulary is valid")
}

pub fn followers(n: usize) -> Vec<Principal> {
    (0..n).map(|i| principal(&format!("f{i}"))).collect()
}

pub fn object<R: Rng>(rng: &mut R) -> Term {
    if rng.random_bool(0.3) {
        Term::literal(*LITERALS.choose(rng).unwrap())
    } else {
        Term::Atom(atom(OBJECTS.choose(rng).unwrap()))
    }
}

pub fn quad<R: Rng>(rng: &mut R, author: &Principal) -> Quad {
    Quad::new(
        atom(SUBJECTS.choose(rng).unwrap()),
        atom(PREDICATES.choose(rng).unwrap()),
        object(rng),
        author.clone(),
    )
    .expect("generated object is ground")
}

pub fn facts<R: Rng>(rng: &mut R, n: usize, authors: &[Principal]) -> FactSet {
    (0..n)
        .map(|_| {
            let author = authors.choose(rng).unwrap();
            quad(rng, author)
        })
        .collect()
}

fn var<R: Rng>(rng: &mut R) -> Term {
    Term::Variable(Variable::new(*VARIABLES.choose(rng).unwrap()).unwrap())
}

/// A pattern whose positions are variables with probability `p_var`.
pub fn pattern<R: Rng>(rng: &mut R, p_var: f64) -> Pattern {
    let s = if rng.random_bool(p_var) {
        var(rng)
    } else {
        Term::Atom(atom(SUBJECTS.choose(rng).unwrap()))
    };
    let p = if rng.random_bool(p_var * 0.6) {
        var(rng)
    } else {
        Term::Atom(atom(PREDICATES.choose(rng).unwrap()))
    };
    let o = if rng.random_bool(p_var) {
        var(rng)
    } else {
        object(rng)
    };
    Pattern::new(s, p, o).expect("predicate is never a literal")
}

pub fn query<R: Rng>(rng: &mut R, max_patterns: usize) -> MapQuery {
    let n = rng.random_range(1..=max_patterns);
    let patterns: Vec<Pattern> = (0..n).map(|_| pattern(rng, 0.6)).collect();
    let q = MapQuery::new(patterns, Vec::new()).expect("generated query is valid");
    // sometimes project onto a subset of the variables
    if q.select().len() > 1 && rng.random_bool(0.3) {
        let mut select = q.select().to_vec();
        select.shuffle(rng);
        select.truncate(rng.random_range(1..select.len()));
        return q
            .with_select(select)
            .expect("subset of occurring variables");
    }
    q
}

/// A grant pattern: broad enough to match something most of the time.
pub fn grant_pattern<R: Rng>(rng: &mut R) -> Pattern {
    let v = |n: &str| Term::Variable(Variable::new(n).unwrap());
    match rng.random_range(0..4) {
        0 => Pattern::new(
            v("s"),
            Term::Atom(atom(PREDICATES.choose(rng).unwrap())),
            v("o"),
        ),
        1 => Pattern::new(
            Term::Atom(atom(SUBJECTS.choose(rng).unwrap())),
            v("p"),
            v("o"),
        ),
        2 => Pattern::new(v("s"), v("p"), object(rng)),
        _ => Pattern::new(
            v("s"),
            Term::Atom(atom(PREDICATES.choose(rng).unwrap())),
            object(rng),
        ),
    }
    .expect("predicate is never a literal")
}

pub fn grant_spec<R: Rng>(rng: &mut R, grantees: &[Principal], mode: Mode) -> GrantSpec {
    let grantee = if rng.random_bool(0.15) {
        AC_PUBLIC.to_string()
    } else {
        grantees.choose(rng).unwrap().to_string()
    };
    let n = rng.random_range(1..=2);
    GrantSpec {
        grantee,
        mode,
        patterns: (0..n).map(|_| grant_pattern(rng)).collect(),
    }
}

/// Encodes a grant as policy quads authored by `author` under `id`.
pub fn policy_quads(spec: &GrantSpec, id: &str, author: &Principal) -> Vec<Quad> {
    Policy {
        id: atom(id),
        grantee: atom(&spec.grantee),
        mode: spec.mode,
        patterns: spec.patterns.clone(),
        policy_author: author.clone(),
    }
    .to_quads()
    .expect("generated grants have patterns")
}

/// A ground quad satisfying `pattern`, authored by `author`.
pub fn instantiate<R: Rng>(rng: &mut R, pattern: &Pattern, author: &Principal) -> Quad {
    let mut bound: Vec<(Variable, Term)> = Vec::new();
    let mut ground = |t: &Term, pos: usize, rng: &mut R| -> Term {
        match t {
            Term::Variable(v) => {
                if let Some((_, t)) = bound.iter().find(|(b, _)| b == v) {
                    return t.clone();
                }
                let value = match pos {
                    0 => Term::Atom(atom(SUBJECTS.choose(rng).unwrap())),
                    1 => Term::Atom(atom(PREDICATES.choose(rng).unwrap())),
                    _ => object(rng),
                };
                bound.push((v.clone(), value.clone()));
                value
            }
            other => other.clone(),
        }
    };
    let s = ground(pattern.subject(), 0, rng);
    let p = ground(pattern.predicate(), 1, rng);
    let o = ground(pattern.object(), 2, rng);
    let as_atom = |t: Term, fallback: &str| match t {
        Term::Atom(a) => a,
        _ => atom(fallback),
    };
    Quad::new(as_atom(s, "s0"), as_atom(p, "p0"), o, author.clone()).expect("object is ground")
}
