//! Reference computations used to check the library from the outside.
//!
//! Nothing here calls the query engine or the policy decoder: grants are
//! taken from what the driver itself issued, and matching is re-derived.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use crate::access::Mode;
use crate::error::Result;
use crate::map::brute_force_eval;
use crate::model::{Binding, FactSet, MapQuery, Pattern, Principal, Quad, Term};
use crate::store::Repo;

/// A grant as the driver issued it.
#[derive(Clone, Debug)]
pub struct GrantSpec {
    pub grantee: String,
    pub mode: Mode,
    pub patterns: Vec<Pattern>,
}

impl GrantSpec {
    fn applies_to(&self, principal: &Principal) -> bool {
        self.grantee == principal.as_str() || self.grantee == crate::access::AC_PUBLIC
    }
}

/// Pattern test written independently of the engine's unifier.
pub fn naive_matches(p: &Pattern, q: &Quad) -> bool {
    let actual = [
        Term::Atom(q.subject().clone()),
        Term::Atom(q.predicate().clone()),
        q.object().clone(),
    ];
    let mut seen: Vec<(&str, &Term)> = Vec::new();
    for (pt, at) in p.terms().into_iter().zip(actual.iter()) {
        match pt {
            Term::Variable(v) => match seen.iter().find(|(n, _)| *n == v.as_str()) {
                Some((_, bound)) if *bound != at => return false,
                Some(_) => {}
                None => seen.push((v.as_str(), at)),
            },
            other => {
                if other != at {
                    return false;
                }
            }
        }
    }
    true
}

/// Facts readable by `principal` under the issued grants.
pub fn naive_view(
    gis: &FactSet,
    principal: &Principal,
    owner: &Principal,
    grants: &[GrantSpec],
) -> FactSet {
    if principal == owner {
        return gis.clone();
    }
    let patterns: Vec<&Pattern> = grants
        .iter()
        .filter(|g| g.mode == Mode::Read && g.applies_to(principal))
        .flat_map(|g| g.patterns.iter())
        .collect();
    gis.iter()
        .filter(|q| patterns.iter().any(|p| naive_matches(p, q)))
        .cloned()
        .collect()
}

pub fn naive_writable(
    principal: &Principal,
    owner: &Principal,
    q: &Quad,
    grants: &[GrantSpec],
) -> bool {
    if principal == owner {
        return true;
    }
    q.author() == principal
        && grants
            .iter()
            .filter(|g| g.mode == Mode::Write && g.applies_to(principal))
            .flat_map(|g| g.patterns.iter())
            .any(|p| naive_matches(p, q))
}

/// Query answers via the brute-force evaluator. Quads that match none of
/// the query's patterns cannot take part in an answer and are dropped first,
/// which keeps larger views inside the evaluator's size limit.
pub fn oracle_answers(fs: &FactSet, q: &MapQuery) -> Result<BTreeSet<Binding>> {
    let relevant: FactSet = fs
        .iter()
        .filter(|quad| q.patterns().iter().any(|p| naive_matches(p, quad)))
        .cloned()
        .collect();
    brute_force_eval(&relevant, q)
}

/// Set of every `\n`-separated line in every object file under the store.
fn stored_lines(repo_root: &Path) -> std::io::Result<HashSet<Vec<u8>>> {
    let mut lines = HashSet::new();
    let objects = repo_root.join("objects");
    for dir in std::fs::read_dir(objects)? {
        for entry in std::fs::read_dir(dir?.path())? {
            let bytes = std::fs::read(entry?.path())?;
            lines.extend(bytes.split(|&b| b == b'\n').map(<[u8]>::to_vec));
        }
    }
    Ok(lines)
}

/// Canonical lines of `forbidden` found anywhere in the repository's object files.
pub fn leaked_lines(repo: &Repo, forbidden: &FactSet) -> std::io::Result<Vec<String>> {
    let lines = stored_lines(repo.root())?;
    Ok(forbidden
        .iter()
        .map(Quad::to_line)
        .filter(|l| lines.contains(l.as_bytes()))
        .collect())
}

/// Whether `needle` occurs anywhere in the raw bytes of the object store.
pub fn store_contains_bytes(repo: &Repo, needle: &[u8]) -> std::io::Result<bool> {
    let objects = repo.root().join("objects");
    for dir in std::fs::read_dir(objects)? {
        for entry in std::fs::read_dir(dir?.path())? {
            let bytes = std::fs::read(entry?.path())?;
            if bytes.windows(needle.len()).any(|w| w == needle) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Snapshot of every object file, for append-only comparisons.
pub fn snapshot_objects(repo: &Repo) -> Result<BTreeMap<crate::store::Hash, Vec<u8>>> {
    repo.object_hashes()?
        .into_iter()
        .map(|h| Ok((h, repo.read_raw(&h)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::pattern_matches;

    #[test]
    fn naive_matcher_agrees_on_repeated_variables() {
        let q = Quad::parse_parts("a", "p", "a", "x").unwrap();
        for text in [
            "?v <p> ?v",
            "?v ?w ?v",
            "?v ?v ?v",
            "<a> ?w <b>",
            "?s ?p ?o",
        ] {
            let p = Pattern::parse(text).unwrap();
            assert_eq!(naive_matches(&p, &q), pattern_matches(&p, &q), "{text}");
        }
    }
}
