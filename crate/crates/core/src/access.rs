//! Policy-mediated views over a repository's facts.
//!
//! Requests pass through three layers: the full fact set, the requester's
//! policy view (facts matched by a read grant), and the requester's own MAP
//! query evaluated over that policy view only.
//!
//! Grants are ordinary quads in the fact set, written with the reserved
//! `ac:` vocabulary:
//!
//! ```text
//! <P> <ac:type> <ac:policy>
//! <P> <ac:grantee> <G>            G is a principal or ac:public
//! <P> <ac:mode> "read" | "write"
//! <P> <ac:pattern> <PAT>          one per pattern
//! <PAT> <ac:s> "<encoded term>"
//! <PAT> <ac:p> "<encoded term>"
//! <PAT> <ac:o> "<encoded term>"
//! ```
//!
//! Only quads authored by the repository owner are read when decoding
//! grants. Unknown principals get nothing; the owner sees everything.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::map::{eval_map, pattern_matches};
use crate::model::{Atom, Binding, FactSet, MapQuery, Pattern, Principal, Quad, Term};
use crate::store::{Hash, Repo};

pub const AC_TYPE: &str = "ac:type";
pub const AC_POLICY: &str = "ac:policy";
pub const AC_GRANTEE: &str = "ac:grantee";
pub const AC_MODE: &str = "ac:mode";
pub const AC_PATTERN: &str = "ac:pattern";
pub const AC_S: &str = "ac:s";
pub const AC_P: &str = "ac:p";
pub const AC_O: &str = "ac:o";
pub const AC_PUBLIC: &str = "ac:public";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Read,
    Write,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Read => "read",
            Mode::Write => "write",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "read" => Ok(Mode::Read),
            "write" => Ok(Mode::Write),
            other => Err(Error::InvalidPolicy(format!("unknown mode {other:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A decoded grant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Policy {
    pub id: Atom,
    /// A principal name or [`AC_PUBLIC`].
    pub grantee: Atom,
    pub mode: Mode,
    pub patterns: Vec<Pattern>,
    pub policy_author: Principal,
}

impl Policy {
    pub fn applies_to(&self, principal: &Principal) -> bool {
        let g = self.grantee.as_str();
        g == AC_PUBLIC || g == principal.as_str()
    }

    pub fn matches(&self, q: &Quad) -> bool {
        self.patterns.iter().any(|p| pattern_matches(p, q))
    }

    /// The quads that encode this policy, authored by `policy_author`.
    /// Pattern nodes are named `<id>-p<index>`.
    pub fn to_quads(&self) -> Result<Vec<Quad>> {
        if self.patterns.is_empty() {
            return Err(Error::InvalidPolicy(
                "a policy needs at least one pattern".into(),
            ));
        }
        let author = &self.policy_author;
        let atom = |s: &str| Atom::new(s).expect("reserved vocabulary is valid");
        let q = |s: &Atom, p: &str, o: Term| Quad::new(s.clone(), atom(p), o, author.clone());
        let mut out = vec![
            q(&self.id, AC_TYPE, Term::Atom(atom(AC_POLICY)))?,
            q(&self.id, AC_GRANTEE, Term::Atom(self.grantee.clone()))?,
            q(&self.id, AC_MODE, Term::literal(self.mode.as_str()))?,
        ];
        for (i, pattern) in self.patterns.iter().enumerate() {
            let node = Atom::new(format!("{}-p{i}", self.id))?;
            out.push(q(&self.id, AC_PATTERN, Term::Atom(node.clone()))?);
            out.push(q(&node, AC_S, Term::literal(pattern.subject().encode()))?);
            out.push(q(&node, AC_P, Term::literal(pattern.predicate().encode()))?);
            out.push(q(&node, AC_O, Term::literal(pattern.object().encode()))?);
        }
        Ok(out)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} grantee={} mode={} patterns=",
            self.id, self.grantee, self.mode
        )?;
        for (i, p) in self.patterns.iter().enumerate() {
            if i > 0 {
                f.write_str(" ; ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// Why a candidate policy was skipped or partially ignored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolicyDiagnostic {
    pub policy: Atom,
    pub reason: String,
}

impl fmt::Display for PolicyDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.policy, self.reason)
    }
}

/// Decodes the effective policies, ordered by id.
pub fn reify_policies(gis: &FactSet, owner: &Principal) -> Vec<Policy> {
    reify_policies_with_diagnostics(gis, owner).0
}

pub fn reify_policies_with_diagnostics(
    gis: &FactSet,
    owner: &Principal,
) -> (Vec<Policy>, Vec<PolicyDiagnostic>) {
    // subject -> predicate -> objects, owner-authored quads only
    let mut index: BTreeMap<&Atom, BTreeMap<&str, Vec<&Term>>> = BTreeMap::new();
    let mut foreign: BTreeMap<&Atom, usize> = BTreeMap::new();
    let mut candidates: BTreeSet<&Atom> = BTreeSet::new();
    for q in gis {
        if !q.predicate().as_str().starts_with("ac:") {
            continue;
        }
        let is_policy_decl = q.predicate().as_str() == AC_TYPE
            && matches!(q.object(), Term::Atom(a) if a.as_str() == AC_POLICY);
        if q.author() == owner {
            if is_policy_decl {
                candidates.insert(q.subject());
            }
            index
                .entry(q.subject())
                .or_default()
                .entry(q.predicate().as_str())
                .or_default()
                .push(q.object());
        } else {
            if is_policy_decl {
                candidates.insert(q.subject());
            }
            *foreign.entry(q.subject()).or_default() += 1;
        }
    }

    let mut policies = Vec::new();
    let mut diagnostics = Vec::new();
    for id in candidates {
        if let Some(n) = foreign.get(id) {
            diagnostics.push(PolicyDiagnostic {
                policy: id.clone(),
                reason: format!("ignored {n} ac: quads not authored by owner {owner}"),
            });
        }
        match decode_policy(id, &index, owner) {
            Ok(p) => policies.push(p),
            Err(reason) => diagnostics.push(PolicyDiagnostic {
                policy: id.clone(),
                reason,
            }),
        }
    }
    (policies, diagnostics)
}

type Index<'a> = BTreeMap<&'a Atom, BTreeMap<&'a str, Vec<&'a Term>>>;

fn single<'a>(index: &Index<'a>, subject: &Atom, predicate: &str) -> Result<&'a Term, String> {
    let values = index
        .get(subject)
        .and_then(|m| m.get(predicate))
        .map(Vec::as_slice)
        .unwrap_or_default();
    match values {
        [one] => Ok(one),
        [] => Err(format!("{subject} has no {predicate}")),
        _ => Err(format!("{subject} has {} {predicate} values", values.len())),
    }
}

fn decode_policy(id: &Atom, index: &Index<'_>, owner: &Principal) -> Result<Policy, String> {
    if !index.get(id).and_then(|m| m.get(AC_TYPE)).is_some_and(|v| {
        v.iter()
            .any(|t| matches!(t, Term::Atom(a) if a.as_str() == AC_POLICY))
    }) {
        return Err(format!(
            "no {AC_TYPE} {AC_POLICY} declaration by owner {owner}"
        ));
    }
    let grantee = match single(index, id, AC_GRANTEE)? {
        Term::Atom(a) => a.clone(),
        other => return Err(format!("grantee {other} is not an atom")),
    };
    let mode = match single(index, id, AC_MODE)? {
        Term::Literal(m) => m.parse::<Mode>().map_err(|e| e.to_string())?,
        other => return Err(format!("mode {other} is not a literal")),
    };
    let nodes = index
        .get(id)
        .and_then(|m| m.get(AC_PATTERN))
        .cloned()
        .unwrap_or_default();
    if nodes.is_empty() {
        return Err("policy has no patterns".into());
    }
    let mut patterns = Vec::with_capacity(nodes.len());
    for node in nodes {
        let Term::Atom(node) = node else {
            return Err(format!("pattern node {node} is not an atom"));
        };
        let term = |pred: &str| -> Result<Term, String> {
            match single(index, node, pred)? {
                Term::Literal(enc) => Term::decode(enc).map_err(|e| e.to_string()),
                other => Err(format!("{node} {pred} {other} is not an encoded term")),
            }
        };
        let pattern =
            Pattern::new(term(AC_S)?, term(AC_P)?, term(AC_O)?).map_err(|e| e.to_string())?;
        patterns.push(pattern);
    }
    Ok(Policy {
        id: id.clone(),
        grantee,
        mode,
        patterns,
        policy_author: owner.clone(),
    })
}

fn effective<'a>(
    policies: &'a [Policy],
    principal: &'a Principal,
    mode: Mode,
) -> impl Iterator<Item = &'a Policy> {
    policies
        .iter()
        .filter(move |p| p.mode == mode && p.applies_to(principal))
}

/// The facts `principal` may read: everything for the owner, otherwise the
/// quads matched by some applicable read grant.
pub fn policy_view(gis: &FactSet, principal: &Principal, owner: &Principal) -> FactSet {
    if principal == owner {
        return gis.clone();
    }
    let policies = reify_policies(gis, owner);
    let grants: Vec<&Policy> = effective(&policies, principal, Mode::Read).collect();
    if grants.is_empty() {
        return FactSet::new();
    }
    gis.filter(|q| grants.iter().any(|p| p.matches(q)))
}

/// Whether `principal` may contribute `q` to the owner's repository.
pub fn permitted_write(gis: &FactSet, principal: &Principal, q: &Quad, owner: &Principal) -> bool {
    if principal == owner {
        return true;
    }
    if q.author() != principal {
        return false;
    }
    let policies = reify_policies(gis, owner);
    let allowed = effective(&policies, principal, Mode::Write).any(|p| p.matches(q));
    allowed
}

/// Evaluates an interest query strictly over the principal's policy view.
pub fn chain_eval(
    gis: &FactSet,
    principal: &Principal,
    owner: &Principal,
    q: &MapQuery,
) -> BTreeSet<Binding> {
    eval_map(&policy_view(gis, principal, owner), q)
}

/// A query-only handle on one principal's view of one commit.
#[derive(Clone, Debug)]
pub struct SealedView {
    commit: Hash,
    principal: Principal,
    permitted: FactSet,
}

impl SealedView {
    pub fn commit(&self) -> &Hash {
        &self.commit
    }

    pub fn principal(&self) -> &Principal {
        &self.principal
    }

    pub fn map(&self, q: &MapQuery) -> BTreeSet<Binding> {
        eval_map(&self.permitted, q)
    }
}

pub fn seal(repo: &Repo, commit: &Hash, principal: &Principal) -> Result<SealedView> {
    let gis = repo.resolve_facts(commit)?;
    Ok(SealedView {
        commit: *commit,
        principal: principal.clone(),
        permitted: policy_view(&gis, principal, repo.owner()),
    })
}
