//! Randomized property suite. Every case derives its own RNG stream from
//! the seed, so a report is a pure function of `(seed, cases, mutation)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::access::{policy_view, reify_policies, Mode};
use crate::error::{Error, Result};
use crate::harness::gen;
use crate::harness::oracle::{
    leaked_lines, naive_view, naive_writable, snapshot_objects, GrantSpec,
};
use crate::map::{brute_force_eval, eval_map, map_delta};
use crate::model::{FactSet, MapQuery, Principal, Quad};
use crate::store::{factset_hash, Hash, Repo};
use crate::sync::{self, merge_factsets, Credential};

/// Deliberate defects for checking that the suite notices them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    /// Policy view that honors grants written by anyone, not just the owner.
    SkipOwnerCheck,
}

#[derive(Clone, Debug)]
pub struct PropertyConfig {
    pub seed: u64,
    pub cases: usize,
    pub mutation: Option<Mutation>,
    /// Run the on-disk protocol properties (clone, pull, push) every
    /// `protocol_every` cases; 0 disables them.
    pub protocol_every: usize,
}

impl PropertyConfig {
    pub fn new(seed: u64, cases: usize) -> Self {
        PropertyConfig {
            seed,
            cases,
            mutation: None,
            protocol_every: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertyStat {
    pub name: &'static str,
    pub checks: usize,
    pub violations: usize,
}

const PROPERTIES: &[&str] = &[
    "oracle_equivalence",
    "pattern_order_independence",
    "author_blindness",
    "narrowing",
    "no_leak",
    "self_grant_immunity",
    "grant_monotonicity",
    "merge_algebra",
    "hash_determinism",
    "clone_safety",
    "push_atomicity",
    "convergence",
    "add_only_delta",
    "monotone_master",
    "append_only_store",
    "content_addressing",
];

const MAX_DETAILED: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertyReport {
    pub seed: u64,
    pub cases: usize,
    pub mutation: Option<Mutation>,
    pub stats: Vec<PropertyStat>,
    /// Violation records with minimized counterexamples, capped in number.
    pub details: Vec<String>,
    /// Digest over every final master head produced by protocol cases.
    pub heads_digest: Hash,
}

impl PropertyReport {
    pub fn stat(&self, name: &str) -> Option<&PropertyStat> {
        self.stats.iter().find(|s| s.name == name)
    }

    pub fn violations(&self) -> usize {
        self.stats.iter().map(|s| s.violations).sum()
    }

    pub fn ok(&self) -> bool {
        self.violations() == 0
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let mutation = self
            .mutation
            .map_or("none".to_string(), |m| format!("{m:?}"));
        writeln!(
            out,
            "report props seed={} cases={} mutation={mutation}",
            self.seed, self.cases
        )
        .unwrap();
        for s in &self.stats {
            writeln!(
                out,
                "property {} checks={} violations={}",
                s.name, s.checks, s.violations
            )
            .unwrap();
        }
        for d in &self.details {
            writeln!(out, "{d}").unwrap();
        }
        writeln!(out, "heads-digest {}", self.heads_digest).unwrap();
        writeln!(out, "violations {}", self.violations()).unwrap();
        writeln!(out, "result {}", if self.ok() { "pass" } else { "fail" }).unwrap();
        out
    }

    /// `Err(PropertyViolation)` naming the first violated property, if any.
    pub fn check(&self) -> Result<()> {
        match self.stats.iter().find(|s| s.violations > 0) {
            None => Ok(()),
            Some(s) => Err(Error::PropertyViolation(format!(
                "{} violated {} times; first: {}",
                s.name,
                s.violations,
                self.details.first().map_or("", String::as_str)
            ))),
        }
    }
}

type ViewFn = fn(&FactSet, &Principal, &Principal) -> FactSet;

fn mutant_view(gis: &FactSet, principal: &Principal, owner: &Principal) -> FactSet {
    if principal == owner {
        return gis.clone();
    }
    // decode as if every quad were the owner's
    let as_owner: FactSet = gis.iter().map(|q| q.with_author(owner.clone())).collect();
    let grants: Vec<_> = reify_policies(&as_owner, owner)
        .into_iter()
        .filter(|p| p.mode == Mode::Read && p.applies_to(principal))
        .collect();
    gis.filter(|q| grants.iter().any(|p| p.matches(q)))
}

struct Suite {
    view: ViewFn,
    stats: BTreeMap<&'static str, (usize, usize)>,
    details: Vec<String>,
    heads: Vec<Hash>,
}

impl Suite {
    fn check(&mut self, name: &'static str, ok: bool, detail: impl FnOnce() -> Vec<String>) {
        let entry = self.stats.get_mut(name).expect("registered property");
        entry.0 += 1;
        if !ok {
            entry.1 += 1;
            if self.details.len() < MAX_DETAILED {
                self.details.extend(detail());
            }
        }
    }
}

fn counterexample(header: String, facts: &FactSet) -> Vec<String> {
    let mut out = vec![header];
    out.extend(
        facts
            .iter()
            .take(16)
            .map(|q| format!("  counterexample {q}")),
    );
    if facts.len() > 16 {
        out.push(format!("  counterexample ... {} more", facts.len() - 16));
    }
    out
}

/// Greedily drops quads while `fails` keeps holding.
fn minimize(facts: &FactSet, fails: impl Fn(&FactSet) -> bool) -> FactSet {
    let mut current = facts.clone();
    let mut changed = true;
    while changed {
        changed = false;
        let quads: Vec<Quad> = current.iter().cloned().collect();
        for q in quads {
            let candidate = current.filter(|x| *x != q);
            if fails(&candidate) {
                current = candidate;
                changed = true;
            }
        }
    }
    current
}

pub fn run_property_suite(config: &PropertyConfig) -> Result<PropertyReport> {
    if config.cases == 0 {
        return Err(Error::PropertyViolation("cases must be at least 1".into()));
    }
    let mut suite = Suite {
        view: match config.mutation {
            None => policy_view,
            Some(Mutation::SkipOwnerCheck) => mutant_view,
        },
        stats: PROPERTIES.iter().map(|&p| (p, (0, 0))).collect(),
        details: Vec::new(),
        heads: Vec::new(),
    };
    for case in 0..config.cases {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(case as u64);
        for _ in 0..2 {
            oracle_case(&mut suite, &mut rng, case);
        }
        view_case(&mut suite, &mut rng, case);
        algebra_case(&mut suite, &mut rng, case);
        if config.protocol_every > 0 && case % config.protocol_every == 0 {
            protocol_case(&mut suite, &mut rng, case)?;
        }
    }
    let mut digest_input = Vec::new();
    for h in &suite.heads {
        digest_input.extend_from_slice(h.as_bytes());
    }
    Ok(PropertyReport {
        seed: config.seed,
        cases: config.cases,
        mutation: config.mutation,
        stats: PROPERTIES
            .iter()
            .map(|&name| {
                let (checks, violations) = suite.stats[name];
                PropertyStat {
                    name,
                    checks,
                    violations,
                }
            })
            .collect(),
        details: suite.details,
        heads_digest: Hash::of_bytes(&digest_input),
    })
}

fn oracle_case(suite: &mut Suite, rng: &mut ChaCha8Rng, case: usize) {
    let owner = gen::principal("alice");
    let authors = [owner.clone(), gen::principal("f0")];
    let n = rng.random_range(0..=6);
    let fs = gen::facts(rng, n, &authors);
    let q = gen::query(rng, 3);
    let fast = eval_map(&fs, &q);
    let slow = brute_force_eval(&fs, &q).expect("within oracle limits");
    suite.check("oracle_equivalence", fast == slow, || {
        counterexample(
            format!("violation oracle_equivalence case={case} query={q}"),
            &fs,
        )
    });

    let mut patterns = q.patterns().to_vec();
    patterns.shuffle(rng);
    let permuted = MapQuery::new(patterns, q.select().to_vec()).expect("same variables");
    suite.check(
        "pattern_order_independence",
        eval_map(&fs, &permuted) == fast,
        || {
            counterexample(
                format!("violation pattern_order_independence case={case} query={q}"),
                &fs,
            )
        },
    );

    let reauthored: FactSet = fs
        .iter()
        .map(|quad| quad.with_author(authors.choose(rng).unwrap().clone()))
        .collect();
    suite.check(
        "author_blindness",
        eval_map(&reauthored, &q) == fast,
        || {
            counterexample(
                format!("violation author_blindness case={case} query={q}"),
                &fs,
            )
        },
    );
}

struct ViewInstance {
    owner: Principal,
    principals: Vec<Principal>,
    gis: FactSet,
    forged: FactSet,
    grants: Vec<GrantSpec>,
}

fn view_instance(rng: &mut ChaCha8Rng) -> ViewInstance {
    let owner = gen::principal("alice");
    let followers = gen::followers(rng.random_range(1..=4));
    let mut authors = vec![owner.clone()];
    authors.extend(followers.iter().cloned());

    let mut gis = FactSet::new();
    let mut forged = FactSet::new();
    let mut grants = Vec::new();
    let n_policies = rng.random_range(0..=10);
    for i in 0..n_policies {
        let mode = if rng.random_bool(0.7) {
            Mode::Read
        } else {
            Mode::Write
        };
        let spec = gen::grant_spec(rng, &followers, mode);
        if rng.random_bool(0.25) {
            // a follower writing itself a policy
            let author = followers.choose(rng).unwrap().clone();
            let spec = GrantSpec {
                grantee: author.to_string(),
                ..spec
            };
            forged.extend(gen::policy_quads(&spec, &format!("ac:forged-{i}"), &author));
        } else {
            gis.extend(gen::policy_quads(&spec, &format!("ac:pol-{i}"), &owner));
            grants.push(spec);
        }
    }
    gis.extend(forged.iter().cloned());
    let room = 200usize.saturating_sub(gis.len()).min(150);
    let n_data = rng.random_range(0..=room);
    gis.extend(gen::facts(rng, n_data, &authors));

    let mut principals = authors;
    principals.shuffle(rng);
    ViewInstance {
        owner,
        principals,
        gis,
        forged,
        grants,
    }
}

fn view_case(suite: &mut Suite, rng: &mut ChaCha8Rng, case: usize) {
    let inst = view_instance(rng);
    let queries: Vec<MapQuery> = (0..rng.random_range(1..=20))
        .map(|_| gen::query(rng, 3))
        .collect();
    let view_fn = suite.view;
    let owner = &inst.owner;
    for p in &inst.principals {
        let view = view_fn(&inst.gis, p, owner);
        let oracle = naive_view(&inst.gis, p, owner, &inst.grants);

        suite.check("narrowing", view.is_subset(&inst.gis), || {
            vec![format!("violation narrowing case={case} principal={p}")]
        });

        let leaks = |gis: &FactSet| {
            !view_fn(gis, p, owner)
                .difference(&naive_view(gis, p, owner, &inst.grants))
                .is_empty()
        };
        suite.check("no_leak", view.is_subset(&oracle), || {
            let small = minimize(&inst.gis, leaks);
            counterexample(
                format!(
                    "violation no_leak case={case} principal={p} extra={} minimized={}",
                    view.difference(&oracle).len(),
                    small.len()
                ),
                &small,
            )
        });

        for q in &queries {
            let chain = eval_map(&view, q);
            let full = eval_map(&inst.gis, q);
            suite.check("narrowing", chain.is_subset(&full), || {
                vec![format!(
                    "violation narrowing case={case} principal={p} query={q}"
                )]
            });
            let permitted = eval_map(&oracle, q);
            suite.check("no_leak", chain.is_subset(&permitted), || {
                vec![format!(
                    "violation no_leak case={case} principal={p} query={q}"
                )]
            });
        }

        let without_forged = inst.gis.difference(&inst.forged);
        let immune =
            view_fn(&without_forged, p, owner) == view.filter(|q| !inst.forged.contains(q));
        suite.check("self_grant_immunity", immune, || {
            counterexample(
                format!("violation self_grant_immunity case={case} principal={p}"),
                &inst.forged,
            )
        });
    }

    if let Some(p) = inst.principals.iter().find(|p| *p != owner) {
        let before = view_fn(&inst.gis, p, owner);
        let extra = GrantSpec {
            grantee: p.to_string(),
            ..gen::grant_spec(rng, std::slice::from_ref(p), Mode::Read)
        };
        let mut grown = inst.gis.clone();
        grown.extend(gen::policy_quads(&extra, "ac:pol-extra", owner));
        let after = view_fn(&grown, p, owner);
        suite.check("grant_monotonicity", before.is_subset(&after), || {
            vec![format!(
                "violation grant_monotonicity case={case} principal={p}"
            )]
        });
    }
}

fn algebra_case(suite: &mut Suite, rng: &mut ChaCha8Rng, case: usize) {
    let authors = [gen::principal("alice"), gen::principal("f0")];
    let pick = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(0..=12);
        gen::facts(rng, n, &authors)
    };
    let (base, a, b, c) = (pick(rng), pick(rng), pick(rng), pick(rng));
    let union_oracle: BTreeSet<String> = a.iter().chain(b.iter()).map(Quad::to_line).collect();
    let ab = merge_factsets(&base, &a, &b);
    let ok = ab == merge_factsets(&base, &b, &a)
        && merge_factsets(&base, &ab, &c)
            == merge_factsets(&base, &a, &merge_factsets(&base, &b, &c))
        && merge_factsets(&base, &a, &a) == a
        && ab.iter().map(Quad::to_line).collect::<BTreeSet<_>>() == union_oracle;
    suite.check("merge_algebra", ok, || {
        vec![format!("violation merge_algebra case={case}")]
    });

    let fs = pick(rng).union(&pick(rng));
    let mut quads: Vec<Quad> = fs.iter().cloned().collect();
    quads.shuffle(rng);
    let mut rebuilt = FactSet::new();
    for q in quads {
        rebuilt.insert(q);
    }
    suite.check(
        "hash_determinism",
        factset_hash(&rebuilt) == factset_hash(&fs)
            && rebuilt.canonical_bytes() == fs.canonical_bytes(),
        || counterexample(format!("violation hash_determinism case={case}"), &fs),
    );
}

struct Member {
    principal: Principal,
    cred: Credential,
    repo: Repo,
    own: FactSet,
}

fn write_patterns(grants: &[GrantSpec], p: &Principal) -> Vec<crate::model::Pattern> {
    grants
        .iter()
        .filter(|g| {
            g.mode == Mode::Write
                && (g.grantee == p.as_str() || g.grantee == crate::access::AC_PUBLIC)
        })
        .flat_map(|g| g.patterns.iter().cloned())
        .collect()
}

fn protocol_case(suite: &mut Suite, rng: &mut ChaCha8Rng, case: usize) -> Result<()> {
    let tmp = tempfile::tempdir().map_err(|e| Error::storage(std::env::temp_dir(), e))?;
    let owner = gen::principal("alice");
    let master = sync::init(tmp.path().join("master"), &owner)?;
    let n_followers = rng.random_range(1..=3);
    let principals = gen::followers(n_followers);

    let n = rng.random_range(5..=30);
    sync::add(
        &master,
        gen::facts(rng, n, std::slice::from_ref(&owner)),
        &owner,
        "seed",
    )?;
    let mut grants: Vec<GrantSpec> = Vec::new();
    for p in &principals {
        for mode in [Mode::Read, Mode::Write] {
            if mode == Mode::Write && rng.random_bool(0.25) {
                continue;
            }
            let spec = gen::grant_spec(rng, std::slice::from_ref(p), mode);
            sync::grant(
                &master,
                &owner,
                &gen::principal(&spec.grantee),
                mode,
                spec.patterns.clone(),
            )?;
            grants.push(spec);
        }
    }

    let mut members = Vec::new();
    for p in &principals {
        let token = format!("tok-{p}-{case}");
        master.set_token(p, &token)?;
        let cred = Credential::new(p.clone(), token)?;
        let repo = sync::clone(&master, &cred, tmp.path().join(p.as_str()))?;
        let master_facts = master.resolve_facts(&master.head()?)?;
        let allowed = naive_view(&master_facts, p, &owner, &grants);
        let forbidden = master_facts.difference(&allowed);
        let leaked = leaked_lines(&repo, &forbidden).map_err(|e| Error::storage(repo.root(), e))?;
        let cloned = repo.resolve_facts(&repo.head()?)?;
        suite.check(
            "clone_safety",
            leaked.is_empty() && cloned == allowed,
            || {
                let mut d = vec![format!(
                    "violation clone_safety case={case} principal={p} leaked={}",
                    leaked.len()
                )];
                d.extend(
                    leaked
                        .iter()
                        .take(8)
                        .map(|l| format!("  counterexample {l}")),
                );
                d
            },
        );
        members.push(Member {
            principal: p.clone(),
            cred,
            repo,
            own: FactSet::new(),
        });
    }

    let snapshot = snapshot_objects(&master)?;
    let events = rng.random_range(4..=12);
    for _ in 0..events {
        let m = rng.random_range(0..members.len());
        match rng.random_range(0..5) {
            0 => {
                let k = rng.random_range(1..=4);
                sync::add(
                    &master,
                    gen::facts(rng, k, std::slice::from_ref(&owner)),
                    &owner,
                    "update",
                )?;
            }
            1 => {
                let member = &members[m];
                sync::pull(&member.repo, &master, &member.cred)?;
            }
            2 => {
                let member = &mut members[m];
                let pats = write_patterns(&grants, &member.principal);
                if pats.is_empty() {
                    continue;
                }
                let k = rng.random_range(1..=3);
                let quads: Vec<Quad> = (0..k)
                    .map(|_| {
                        let pat = pats.choose(rng).unwrap().clone();
                        gen::instantiate(rng, &pat, &member.principal)
                    })
                    .collect();
                sync::add(
                    &member.repo,
                    quads.iter().cloned(),
                    &member.principal,
                    "local",
                )?;
                member.own.extend(quads);
            }
            3 => {
                let member = &members[m];
                let pushed = sync::push(&member.repo, &master, &member.cred);
                suite.check("convergence", pushed.is_ok(), || {
                    vec![format!(
                        "violation convergence case={case} principal={} push failed: {}",
                        member.principal,
                        pushed
                            .as_ref()
                            .err()
                            .map(|e| e.to_string())
                            .unwrap_or_default()
                    )]
                });
            }
            _ => {
                let p = members[m].principal.clone();
                let spec = gen::grant_spec(rng, std::slice::from_ref(&p), Mode::Read);
                sync::grant(
                    &master,
                    &owner,
                    &gen::principal(&spec.grantee),
                    Mode::Read,
                    spec.patterns.clone(),
                )?;
                grants.push(spec);
            }
        }
    }

    adversarial_push(suite, rng, case, &master, &members, &grants, tmp.path())?;

    for member in &members {
        let pushed = sync::push(&member.repo, &master, &member.cred);
        suite.check("convergence", pushed.is_ok(), || {
            vec![format!(
                "violation convergence case={case} principal={} final push failed",
                member.principal
            )]
        });
    }
    for member in &members {
        sync::pull(&member.repo, &master, &member.cred)?;
    }

    let master_head = master.head()?;
    let master_facts = master.resolve_facts(&master_head)?;
    for member in &members {
        let p = &member.principal;
        let expected = naive_view(&master_facts, p, &owner, &grants).union(&member.own);
        let actual = member.repo.resolve_facts(&member.repo.head()?)?;
        let pushed_all = member.own.is_subset(&master_facts);
        suite.check("convergence", actual == expected && pushed_all, || {
            let mut diff = actual.difference(&expected);
            diff.extend(expected.difference(&actual));
            counterexample(
                format!("violation convergence case={case} principal={p} symmetric-difference"),
                &diff,
            )
        });
        let forbidden = master_facts.difference(&expected);
        let leaked = leaked_lines(&member.repo, &forbidden)
            .map_err(|e| Error::storage(member.repo.root(), e))?;
        suite.check("clone_safety", leaked.is_empty(), || {
            vec![format!(
                "violation clone_safety case={case} principal={p} after sync leaked={}",
                leaked.len()
            )]
        });
        suite.check("content_addressing", member.repo.audit().is_ok(), || {
            vec![format!(
                "violation content_addressing case={case} principal={p}"
            )]
        });
        add_only_checks(suite, rng, case, &member.repo, Some((p, &master)))?;
    }

    let preserved = snapshot
        .iter()
        .all(|(h, bytes)| master.read_raw(h).map(|b| b == *bytes).unwrap_or(false));
    suite.check("append_only_store", preserved, || {
        vec![format!("violation append_only_store case={case}")]
    });
    suite.check("content_addressing", master.audit().is_ok(), || {
        vec![format!("violation content_addressing case={case} master")]
    });

    let log = master.log(&master_head)?;
    let monotone = log.iter().all(|(h, c)| {
        c.parents.iter().all(
            |p| match (master.resolve_facts(p), master.resolve_facts(h)) {
                (Ok(a), Ok(b)) => a.is_subset(&b),
                _ => false,
            },
        )
    });
    suite.check("monotone_master", monotone, || {
        vec![format!("violation monotone_master case={case}")]
    });
    add_only_checks(suite, rng, case, &master, None)?;

    // parent order never changes a merge commit's address
    let scratch = Repo::create_layout(tmp.path().join("scratch"), &owner)?;
    let r1 = scratch.create_commit(&[], &FactSet::new(), &owner, "r1")?;
    let r2 = scratch.create_commit(&[], &master_facts, &owner, "r2")?;
    let m1 = scratch.create_commit(&[r1, r2], &master_facts, &owner, "m")?;
    let m2 = scratch.create_commit(&[r2, r1], &master_facts, &owner, "m")?;
    suite.check("hash_determinism", m1 == m2, || {
        vec![format!(
            "violation hash_determinism case={case} merge parent order"
        )]
    });

    suite.heads.push(master_head);
    Ok(())
}

/// A throwaway clone adds permitted quads plus at least one forbidden or
/// forged quad; the push must be rejected without touching the master.
fn adversarial_push(
    suite: &mut Suite,
    rng: &mut ChaCha8Rng,
    case: usize,
    master: &Repo,
    members: &[Member],
    grants: &[GrantSpec],
    dir: &std::path::Path,
) -> Result<()> {
    let owner = master.owner().clone();
    let member = members.choose(rng).unwrap();
    let p = &member.principal;
    let repo = sync::clone(master, &member.cred, dir.join(format!("adversary-{p}")))?;
    let pats = write_patterns(grants, p);
    let mut quads: Vec<Quad> = (0..rng.random_range(0..=2))
        .filter_map(|_| {
            let pat = pats.choose(rng)?.clone();
            Some(gen::instantiate(rng, &pat, p))
        })
        .collect();

    let cloned = repo.resolve_facts(&repo.head()?)?;
    let mut others: Vec<Principal> = members
        .iter()
        .map(|m| m.principal.clone())
        .filter(|o| o != p)
        .collect();
    others.push(owner.clone());
    let mut bad = None;
    for _ in 0..50 {
        let candidate = if !pats.is_empty() && rng.random_bool(0.5) {
            // permitted shape, forged author
            let victim = others.choose(rng).unwrap().clone();
            let pat = pats.choose(rng).unwrap().clone();
            gen::instantiate(rng, &pat, &victim)
        } else {
            gen::quad(rng, p)
        };
        if !naive_writable(p, &owner, &candidate, grants) && !cloned.contains(&candidate) {
            bad = Some(candidate);
            break;
        }
    }
    let Some(bad) = bad else {
        // every generated quad was writable or already visible
        std::fs::remove_dir_all(repo.root()).map_err(|e| Error::storage(repo.root(), e))?;
        return Ok(());
    };
    quads.push(bad);
    sync::add(&repo, quads, p, "adversarial")?;

    let head_before = master.head()?;
    let count_before = master.object_count()?;
    let outcome = sync::push(&repo, master, &member.cred);
    let rejected = matches!(outcome, Err(Error::PushRejected(_)));
    let unchanged = master.head()? == head_before && master.object_count()? == count_before;
    suite.check("push_atomicity", rejected && unchanged, || {
        vec![format!(
            "violation push_atomicity case={case} principal={p} rejected={rejected} unchanged={unchanged}"
        )]
    });
    std::fs::remove_dir_all(repo.root()).map_err(|e| Error::storage(repo.root(), e))?;
    Ok(())
}

/// `map_delta(...).removed` is empty between any ancestor and descendant,
/// over raw facts and, when a master is given, over the member's view of it.
fn add_only_checks(
    suite: &mut Suite,
    rng: &mut ChaCha8Rng,
    case: usize,
    repo: &Repo,
    member_of: Option<(&Principal, &Repo)>,
) -> Result<()> {
    let head = repo.head()?;
    let log = repo.log(&head)?;
    for _ in 0..3 {
        let (desc, _) = log.choose(rng).unwrap();
        let ancestors: Vec<Hash> = repo.ancestors(desc)?.into_iter().collect();
        let anc = ancestors.choose(rng).unwrap();
        let q = gen::query(rng, 2);
        let old = repo.resolve_facts(anc)?;
        let new = repo.resolve_facts(desc)?;
        let delta = map_delta(&old, &new, &q);
        suite.check("add_only_delta", delta.removed.is_empty(), || {
            vec![format!(
                "violation add_only_delta case={case} {anc} -> {desc} query={q}"
            )]
        });
    }
    if let Some((p, master)) = member_of {
        let mhead = master.head()?;
        let mlog = master.log(&mhead)?;
        let (desc, _) = mlog.choose(rng).unwrap();
        let ancestors: Vec<Hash> = master.ancestors(desc)?.into_iter().collect();
        let anc = ancestors.choose(rng).unwrap();
        let q = gen::query(rng, 2);
        let view = |c: &Hash| -> Result<FactSet> {
            Ok(policy_view(&master.resolve_facts(c)?, p, master.owner()))
        };
        let delta = map_delta(&view(anc)?, &view(desc)?, &q);
        suite.check("add_only_delta", delta.removed.is_empty(), || {
            vec![format!(
                "violation add_only_delta case={case} principal={p} {anc} -> {desc} query={q}"
            )]
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes_and_is_deterministic() {
        let cfg = PropertyConfig::new(7, 12);
        let a = run_property_suite(&cfg).unwrap();
        assert!(a.ok(), "{}", a.render());
        let b = run_property_suite(&cfg).unwrap();
        assert_eq!(a.render(), b.render());
        assert!(a.stat("push_atomicity").unwrap().checks > 0);
    }

    #[test]
    fn mutation_is_caught() {
        let cfg = PropertyConfig {
            mutation: Some(Mutation::SkipOwnerCheck),
            protocol_every: 0,
            ..PropertyConfig::new(1, 60)
        };
        let report = run_property_suite(&cfg).unwrap();
        assert!(!report.ok());
        assert!(report.stat("no_leak").unwrap().violations > 0);
        assert!(matches!(report.check(), Err(Error::PropertyViolation(_))));
        assert!(report.details.iter().any(|d| d.contains("counterexample")));
    }

    #[test]
    fn zero_cases_rejected() {
        assert!(run_property_suite(&PropertyConfig::new(1, 0)).is_err());
    }
}
