//! Scripted multi-principal scenarios and the randomized property suite.
//!
//! A [`Scenario`] is a list of protocol steps run against real repositories
//! in a work directory: one master owned by the scenario owner and one local
//! clone per follower. Query assertions are checked against answers computed
//! by [`oracle`] from the grants the scenario itself issued, never from the
//! library's own policy decoding. After the last step every follower's
//! object store is scanned for canonical lines of facts it may not hold.

pub mod gen;
pub mod oracle;
mod props;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::access::{seal, Mode};
use crate::error::{Error, Result};
use crate::model::{Binding, FactSet, MapQuery, Pattern, Principal, Quad};
use crate::store::{Hash, Repo};
use crate::sync::{self, Credential};

pub use props::{run_property_suite, Mutation, PropertyConfig, PropertyReport, PropertyStat};

use oracle::{leaked_lines, naive_view, oracle_answers, GrantSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PushOutcome {
    Accepted,
    Rejected,
}

#[derive(Clone, Debug)]
pub enum Expected {
    /// Compute the answer from the oracle view of the principal.
    Oracle,
    Bindings(BTreeSet<Binding>),
}

#[derive(Clone, Debug)]
pub enum Step {
    OwnerAdd(Vec<Quad>),
    Grant {
        grantee: Principal,
        mode: Mode,
        patterns: Vec<Pattern>,
    },
    Clone(Principal),
    Pull(Principal),
    FollowerAdd(Principal, Vec<Quad>),
    Push {
        principal: Principal,
        expect: PushOutcome,
    },
    /// Queries the principal's own repository (the master, for the owner).
    Assert {
        principal: Principal,
        query: MapQuery,
        expected: Expected,
    },
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub owner: Principal,
    pub steps: Vec<Step>,
    /// Byte strings that must never appear in any follower's object store.
    pub secrets: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScenarioReport {
    pub name: String,
    pub steps_executed: usize,
    pub passed: usize,
    pub failed: usize,
    pub leakage_clean: bool,
    /// Final head per repository, keyed by role (`master` or a principal).
    pub heads: BTreeMap<String, Hash>,
    /// One record per line, in execution order.
    pub records: Vec<String>,
}

impl ScenarioReport {
    pub fn ok(&self) -> bool {
        self.failed == 0 && self.leakage_clean
    }

    /// Line-record rendering, identical for identical runs.
    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "report {}", self.name).unwrap();
        for r in &self.records {
            writeln!(out, "{r}").unwrap();
        }
        for (role, head) in &self.heads {
            writeln!(out, "head {role} {head}").unwrap();
        }
        writeln!(out, "steps {}", self.steps_executed).unwrap();
        writeln!(
            out,
            "assertions passed={} failed={}",
            self.passed, self.failed
        )
        .unwrap();
        writeln!(
            out,
            "leakage {}",
            if self.leakage_clean {
                "clean"
            } else {
                "LEAKED"
            }
        )
        .unwrap();
        writeln!(out, "result {}", if self.ok() { "pass" } else { "fail" }).unwrap();
        out
    }

    /// `Err(ScenarioFailure)` unless every assertion passed and no leak was found.
    pub fn check(&self) -> Result<()> {
        if self.ok() {
            Ok(())
        } else {
            Err(Error::ScenarioFailure(format!(
                "{}: {} failed assertions, leakage {}",
                self.name,
                self.failed,
                if self.leakage_clean { "clean" } else { "found" }
            )))
        }
    }

    fn record(&mut self, line: String) {
        self.records.push(line);
    }

    fn verdict(&mut self, ok: bool, what: String) {
        if ok {
            self.passed += 1;
            self.record(format!("ok {what}"));
        } else {
            self.failed += 1;
            self.record(format!("FAIL {what}"));
        }
    }
}

struct Follower {
    repo: Repo,
    cred: Credential,
    /// Master facts at the last clone or pull.
    synced: FactSet,
    own: FactSet,
}

struct Runner<'a> {
    workdir: &'a Path,
    owner: Principal,
    master: Repo,
    grants: Vec<GrantSpec>,
    followers: BTreeMap<Principal, Follower>,
    report: ScenarioReport,
}

impl Runner<'_> {
    fn master_facts(&self) -> Result<FactSet> {
        self.master.resolve_facts(&self.master.head()?)
    }

    fn follower(&mut self, p: &Principal) -> Result<&mut Follower> {
        self.followers
            .get_mut(p)
            .ok_or_else(|| Error::ScenarioFailure(format!("{p} has not cloned")))
    }

    fn expected_view(&self, p: &Principal) -> Result<FactSet> {
        if *p == self.owner {
            return self.master_facts();
        }
        let f = &self.followers[p];
        Ok(naive_view(&f.synced, p, &self.owner, &self.grants).union(&f.own))
    }

    fn step(&mut self, step: &Step) -> Result<()> {
        match step {
            Step::OwnerAdd(quads) => {
                let h = sync::add(
                    &self.master,
                    quads.iter().cloned(),
                    &self.owner,
                    "owner add",
                )?;
                self.report.record(format!(
                    "add owner={} quads={} head={h}",
                    self.owner,
                    quads.len()
                ));
            }
            Step::Grant {
                grantee,
                mode,
                patterns,
            } => {
                let h = sync::grant(&self.master, &self.owner, grantee, *mode, patterns.clone())?;
                self.grants.push(GrantSpec {
                    grantee: grantee.to_string(),
                    mode: *mode,
                    patterns: patterns.clone(),
                });
                self.report
                    .record(format!("grant grantee={grantee} mode={mode} head={h}"));
            }
            Step::Clone(p) => {
                let token = format!("token-{p}");
                self.master.set_token(p, &token)?;
                let cred = Credential::new(p.clone(), token)?;
                let dest: PathBuf = self.workdir.join(p.as_str());
                let repo = sync::clone(&self.master, &cred, dest)?;
                let synced = self.master_facts()?;
                let quads = repo.resolve_facts(&repo.head()?)?.len();
                self.report.record(format!(
                    "clone principal={p} quads={quads} head={}",
                    repo.head()?
                ));
                self.followers.insert(
                    p.clone(),
                    Follower {
                        repo,
                        cred,
                        synced,
                        own: FactSet::new(),
                    },
                );
            }
            Step::Pull(p) => {
                let master = self.master.clone();
                let synced = self.master_facts()?;
                let f = self.follower(p)?;
                let receipt = sync::pull(&f.repo, &master, &f.cred)?;
                f.synced = synced;
                self.report.record(format!(
                    "pull principal={p} quads={} head={}",
                    receipt.quads, receipt.new_head
                ));
            }
            Step::FollowerAdd(p, quads) => {
                let f = self.follower(p)?;
                let h = sync::add(&f.repo, quads.iter().cloned(), p, "local add")?;
                f.own.extend(quads.iter().cloned());
                self.report.record(format!(
                    "local-add principal={p} quads={} head={h}",
                    quads.len()
                ));
            }
            Step::Push { principal, expect } => {
                let master = self.master.clone();
                let before = master.head()?;
                let f = self.follower(principal)?;
                let outcome = match sync::push(&f.repo, &master, &f.cred) {
                    Ok(r) => {
                        self.report.record(format!(
                            "push principal={principal} quads={} head={}",
                            r.quads, r.new_head
                        ));
                        PushOutcome::Accepted
                    }
                    Err(Error::PushRejected(bad)) => {
                        self.report.record(format!(
                            "push principal={principal} rejected quads={}",
                            bad.len()
                        ));
                        PushOutcome::Rejected
                    }
                    Err(e) => return Err(e),
                };
                let unchanged = master.head()? == before;
                let ok = outcome == *expect && (outcome == PushOutcome::Accepted || unchanged);
                self.report.verdict(
                    ok,
                    format!("push principal={principal} expected={expect:?} got={outcome:?}"),
                );
            }
            Step::Assert {
                principal,
                query,
                expected,
            } => {
                let (repo, head) = if *principal == self.owner {
                    (self.master.clone(), self.master.head()?)
                } else {
                    let f = self.follower(principal)?;
                    (f.repo.clone(), f.repo.head()?)
                };
                let got = seal(&repo, &head, principal)?.map(query);
                let want = match expected {
                    Expected::Oracle => oracle_answers(&self.expected_view(principal)?, query)?,
                    Expected::Bindings(b) => b.clone(),
                };
                self.report.verdict(
                    got == want,
                    format!(
                        "assert principal={principal} answers={} query={query}",
                        got.len()
                    ),
                );
            }
        }
        self.report.steps_executed += 1;
        Ok(())
    }

    fn scan(&mut self, secrets: &[String]) -> Result<()> {
        let master_facts = self.master_facts()?;
        let mut clean = true;
        let principals: Vec<Principal> = self.followers.keys().cloned().collect();
        for p in principals {
            let f = &self.followers[&p];
            let allowed = naive_view(&master_facts, &p, &self.owner, &self.grants).union(&f.own);
            let forbidden = master_facts.difference(&allowed);
            let io = |e| Error::storage(f.repo.root(), e);
            let leaked = leaked_lines(&f.repo, &forbidden).map_err(io)?;
            let mut secret_hits = 0;
            for s in secrets {
                if oracle::store_contains_bytes(&f.repo, s.as_bytes()).map_err(io)? {
                    secret_hits += 1;
                }
            }
            let head = f.repo.head()?;
            clean &= leaked.is_empty() && secret_hits == 0;
            self.report.record(format!(
                "scan principal={p} forbidden={} leaked={} secret_hits={secret_hits}",
                forbidden.len(),
                leaked.len()
            ));
            self.report.heads.insert(p.to_string(), head);
        }
        self.report.leakage_clean = clean;
        self.report
            .heads
            .insert("master".into(), self.master.head()?);
        Ok(())
    }
}

/// Runs `scenario` in `workdir`, which must be empty or absent.
///
/// Assertion failures are recorded in the report; errors are returned only
/// when a step cannot be executed at all.
pub fn run_scenario(workdir: &Path, name: &str, scenario: &Scenario) -> Result<ScenarioReport> {
    let master = sync::init(workdir.join("master"), &scenario.owner)?;
    let mut runner = Runner {
        workdir,
        owner: scenario.owner.clone(),
        master,
        grants: Vec::new(),
        followers: BTreeMap::new(),
        report: ScenarioReport {
            name: name.to_string(),
            ..Default::default()
        },
    };
    runner
        .report
        .record(format!("init owner={}", scenario.owner));
    for step in &scenario.steps {
        runner.step(step)?;
    }
    runner.scan(&scenario.secrets)?;
    Ok(runner.report)
}

/// Variants of the social-network scenario.
#[derive(Clone, Debug)]
pub struct SocialOptions {
    pub followers: usize,
    /// Whether followers receive write access to comment patterns.
    pub comment_grant: bool,
}

impl Default for SocialOptions {
    fn default() -> Self {
        SocialOptions {
            followers: 2,
            comment_grant: true,
        }
    }
}

const SOCIAL_SECRETS: &[&str] = &["078-05-1120", "hypertension"];

fn q(text: &str) -> MapQuery {
    crate::model::parse_query(text).expect("fixture query is valid")
}

fn fact(s: &str, p: &str, o: &str, author: &Principal) -> Quad {
    Quad::parse_parts(s, p, o, author.as_str()).expect("fixture fact is valid")
}

/// The social-network flow: an owner publishes photos, status updates and
/// events to followers, keeps private facts ungranted, and accepts follower
/// comments back into the master.
pub fn social_scenario(opts: &SocialOptions) -> Scenario {
    let alice = Principal::new("alice").unwrap();
    let names = ["bob", "carol", "dave", "erin"];
    let followers: Vec<Principal> = names
        .iter()
        .cycle()
        .take(opts.followers)
        .enumerate()
        .map(|(i, n)| {
            let name = if i < names.len() {
                n.to_string()
            } else {
                format!("{n}{i}")
            };
            Principal::new(name).unwrap()
        })
        .collect();
    let pat = |s: &str| Pattern::parse(s).expect("fixture pattern is valid");
    let read = vec![
        pat("?s <type> <Photo>"),
        pat("?s <type> <Status>"),
        pat("?s <type> <Event>"),
        pat("?s <caption> ?c"),
        pat("?c <comment_on> ?t"),
        pat("?c <text> ?x"),
    ];
    let write = vec![pat("?c <comment_on> ?t"), pat("?c <text> ?x")];

    let mut steps = vec![Step::OwnerAdd(vec![
        fact(
            "alice",
            "ssn",
            &format!("\"{}\"", SOCIAL_SECRETS[0]),
            &alice,
        ),
        fact("alice", "name", "\"Alice\"", &alice),
        fact("photo1", "type", "Photo", &alice),
        fact("photo1", "caption", "\"Beach day\"", &alice),
    ])];
    for f in &followers {
        steps.push(Step::Grant {
            grantee: f.clone(),
            mode: Mode::Read,
            patterns: read.clone(),
        });
        if opts.comment_grant {
            steps.push(Step::Grant {
                grantee: f.clone(),
                mode: Mode::Write,
                patterns: write.clone(),
            });
        }
    }
    for f in &followers {
        steps.push(Step::Clone(f.clone()));
        steps.push(Step::Assert {
            principal: f.clone(),
            query: q("?s <type> <Photo>"),
            expected: Expected::Oracle,
        });
    }
    steps.push(Step::OwnerAdd(vec![
        fact("photo2", "type", "Photo", &alice),
        fact("photo2", "caption", "\"Sunset\"", &alice),
        fact("status1", "type", "Status", &alice),
        fact("status1", "says", "\"Back from holiday\"", &alice),
        fact("event1", "type", "Event", &alice),
        fact(
            "alice",
            "diagnosis",
            &format!("\"{}\"", SOCIAL_SECRETS[1]),
            &alice,
        ),
    ]));
    for f in &followers {
        steps.push(Step::Pull(f.clone()));
        for text in [
            "?s <type> <Photo>",
            "?s <type> <Status>",
            "?s <type> <Event>",
            "?s <type> <Photo> ; ?s <caption> ?c",
        ] {
            steps.push(Step::Assert {
                principal: f.clone(),
                query: q(text),
                expected: Expected::Oracle,
            });
        }
        for text in ["?x <ssn> ?v", "?x <diagnosis> ?v", "?s <says> ?v"] {
            steps.push(Step::Assert {
                principal: f.clone(),
                query: q(text),
                expected: Expected::Bindings(BTreeSet::new()),
            });
        }
    }
    if let Some(first) = followers.first() {
        steps.push(Step::FollowerAdd(
            first.clone(),
            vec![
                fact("comment1", "comment_on", "photo2", first),
                fact("comment1", "text", "\"Great shot!\"", first),
            ],
        ));
        steps.push(Step::Push {
            principal: first.clone(),
            expect: if opts.comment_grant {
                PushOutcome::Accepted
            } else {
                PushOutcome::Rejected
            },
        });
    }
    steps.push(Step::Assert {
        principal: alice.clone(),
        query: q("?c <comment_on> ?t ; ?c <text> ?x"),
        expected: Expected::Oracle,
    });
    steps.push(Step::Assert {
        principal: alice.clone(),
        query: q("?x <ssn> ?v"),
        expected: Expected::Oracle,
    });
    for f in followers.iter().skip(1) {
        steps.push(Step::Pull(f.clone()));
        steps.push(Step::Assert {
            principal: f.clone(),
            query: q("?c <comment_on> ?t ; ?c <text> ?x"),
            expected: Expected::Oracle,
        });
    }
    Scenario {
        owner: alice,
        steps,
        secrets: SOCIAL_SECRETS.iter().map(|s| s.to_string()).collect(),
    }
}

pub fn run_social_scenario(workdir: &Path, opts: &SocialOptions) -> Result<ScenarioReport> {
    let name = format!(
        "social followers={} comment_grant={}",
        opts.followers, opts.comment_grant
    );
    run_scenario(workdir, &name, &social_scenario(opts))
}
