//! Repository lifecycle and the clone / pull / push protocol.
//!
//! A master repository is addressed by its root path. Followers hold a
//! local repository whose `refs/base/origin` records the last filtered
//! snapshot of the master they synchronized with; pushes are computed as the
//! local facts not in that snapshot.

use std::fmt;

use subtle::ConstantTimeEq;

use crate::access::{permitted_write, policy_view, reify_policies, Mode, Policy};
use crate::error::{Error, Result};
use crate::model::{Atom, FactSet, Pattern, Principal, Quad};
use crate::store::{Hash, RefName, Repo, ORIGIN};

/// A principal and the secret token it presents to a master.
#[derive(Clone)]
pub struct Credential {
    pub principal: Principal,
    token: String,
}

impl Credential {
    pub fn new(principal: Principal, token: impl Into<String>) -> Result<Self> {
        let token = token.into();
        if token.is_empty() {
            return Err(Error::AuthFailed);
        }
        Ok(Credential { principal, token })
    }

    pub fn token(&self) -> &str {
        &self.token
    }
}

impl fmt::Debug for Credential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Credential")
            .field("principal", &self.principal)
            .field("token", &"<redacted>")
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyncReceipt {
    /// Head of the receiving repository after the operation.
    pub new_head: Hash,
    /// Quads fetched (pull) or contributed (push).
    pub quads: usize,
    pub base_updated_to: Hash,
}

pub fn init(path: impl AsRef<std::path::Path>, owner: &Principal) -> Result<Repo> {
    let repo = Repo::create_layout(path, owner)?;
    let root = repo.create_commit(&[], &FactSet::new(), owner, "init")?;
    repo.write_ref(&RefName::Master, &root)?;
    Ok(repo)
}

/// Owner-only append to the master head. Always creates a commit.
pub fn add(
    repo: &Repo,
    quads: impl IntoIterator<Item = Quad>,
    author: &Principal,
    message: &str,
) -> Result<Hash> {
    if author != repo.owner() {
        return Err(Error::NotOwner {
            principal: author.to_string(),
        });
    }
    let _guard = repo.lock()?;
    let head = repo.head()?;
    let mut facts = repo.resolve_facts(&head)?;
    facts.extend(quads);
    let commit = repo.create_commit(&[head], &facts, author, message)?;
    repo.write_ref(&RefName::Master, &commit)?;
    Ok(commit)
}

/// Records a new grant as owner-authored policy quads.
pub fn grant(
    repo: &Repo,
    caller: &Principal,
    grantee: &Principal,
    mode: Mode,
    patterns: Vec<Pattern>,
) -> Result<Hash> {
    if caller != repo.owner() {
        return Err(Error::NotOwner {
            principal: caller.to_string(),
        });
    }
    if patterns.is_empty() {
        return Err(Error::InvalidPolicy(
            "a grant needs at least one pattern".into(),
        ));
    }
    let facts = repo.resolve_facts(&repo.head()?)?;
    let id = next_policy_id(&facts)?;
    let policy = Policy {
        id: id.clone(),
        grantee: grantee.to_atom(),
        mode,
        patterns,
        policy_author: caller.clone(),
    };
    add(
        repo,
        policy.to_quads()?,
        caller,
        &format!("grant {id} {mode} to {grantee}"),
    )
}

/// First `ac:pol-<n>` not yet used as a subject.
fn next_policy_id(facts: &FactSet) -> Result<Atom> {
    let used: std::collections::BTreeSet<&str> =
        facts.iter().map(|q| q.subject().as_str()).collect();
    let n = (0..)
        .find(|n| !used.contains(format!("ac:pol-{n}").as_str()))
        .expect("unbounded range");
    Atom::new(format!("ac:pol-{n}"))
}

/// Effective policies at the repository head.
pub fn policies(repo: &Repo) -> Result<Vec<Policy>> {
    let facts = repo.resolve_facts(&repo.head()?)?;
    Ok(reify_policies(&facts, repo.owner()))
}

/// Checks `cred` against the master's token table in constant time per entry.
pub fn authenticate(master: &Repo, cred: &Credential) -> Result<Principal> {
    let table = master.tokens()?;
    let mut ok = subtle::Choice::from(0u8);
    for (principal, token) in &table {
        let same_principal = subtle::Choice::from((principal == &cred.principal) as u8);
        ok |= same_principal & token.as_bytes().ct_eq(cred.token.as_bytes());
    }
    if bool::from(ok) {
        Ok(cred.principal.clone())
    } else {
        Err(Error::AuthFailed)
    }
}

/// Creates a local repository holding only the principal's policy view of
/// the master head.
pub fn clone(master: &Repo, cred: &Credential, dest: impl AsRef<std::path::Path>) -> Result<Repo> {
    let principal = authenticate(master, cred)?;
    let master_head = master.head()?;
    let view = policy_view(
        &master.resolve_facts(&master_head)?,
        &principal,
        master.owner(),
    );
    let local = Repo::create_layout(dest, &principal)?;
    let root = local.create_commit(&[], &view, &principal, &format!("clone-of {master_head}"))?;
    local.write_ref(&RefName::Base(ORIGIN.into()), &root)?;
    local.write_ref(&RefName::Remote(ORIGIN.into()), &root)?;
    local.write_ref(&RefName::Master, &root)?;
    Ok(local)
}

/// Fetches the principal's current policy view from the master and merges
/// it into the local head.
pub fn pull(local: &Repo, master: &Repo, cred: &Credential) -> Result<SyncReceipt> {
    let principal = authenticate(master, cred)?;
    let _guard = local.lock()?;
    let base_ref = RefName::Base(ORIGIN.into());
    let base = local
        .read_ref(&base_ref)?
        .ok_or(Error::UnrelatedHistories)?;
    let head = local.head()?;

    let master_head = master.head()?;
    let view = policy_view(
        &master.resolve_facts(&master_head)?,
        &principal,
        master.owner(),
    );
    let base_facts = local.resolve_facts(&base)?;
    if view == base_facts {
        return Ok(SyncReceipt {
            new_head: head,
            quads: 0,
            base_updated_to: base,
        });
    }

    let fetched = view.difference(&base_facts).len();
    let remote = local.create_commit(
        &[base],
        &view,
        master.owner(),
        &format!("pull-of {master_head}"),
    )?;
    let local_facts = local.resolve_facts(&head)?;
    let merged = merge_factsets(&base_facts, &local_facts, &view);
    let merge = local.create_commit(&[head, remote], &merged, local.owner(), "merge origin")?;

    local.write_ref(&RefName::Remote(ORIGIN.into()), &remote)?;
    local.write_ref(&base_ref, &remote)?;
    local.write_ref(&RefName::Master, &merge)?;
    Ok(SyncReceipt {
        new_head: merge,
        quads: fetched,
        base_updated_to: remote,
    })
}

/// Sends local additions to the master. Either every quad is permitted and
/// the master advances by one commit, or nothing is written.
pub fn push(local: &Repo, master: &Repo, cred: &Credential) -> Result<SyncReceipt> {
    let principal = authenticate(master, cred)?;
    let base = local
        .read_ref(&RefName::Base(ORIGIN.into()))?
        .ok_or(Error::UnrelatedHistories)?;
    let delta = local
        .resolve_facts(&local.head()?)?
        .difference(&local.resolve_facts(&base)?);

    let _guard = master.lock()?;
    let master_head = master.head()?;
    if delta.is_empty() {
        return Ok(SyncReceipt {
            new_head: master_head,
            quads: 0,
            base_updated_to: base,
        });
    }
    let master_facts = master.resolve_facts(&master_head)?;
    let offending: Vec<Quad> = delta
        .iter()
        .filter(|q| !permitted_write(&master_facts, &principal, q, master.owner()))
        .cloned()
        .collect();
    if !offending.is_empty() {
        return Err(Error::PushRejected(offending));
    }
    let fresh = delta.difference(&master_facts);
    if fresh.is_empty() {
        return Ok(SyncReceipt {
            new_head: master_head,
            quads: 0,
            base_updated_to: base,
        });
    }
    let merged = merge_factsets(&master_facts, &master_facts, &delta);
    let commit = master.create_commit(
        &[master_head],
        &merged,
        &principal,
        &format!("push-from {principal}"),
    )?;
    master.write_ref(&RefName::Master, &commit)?;
    Ok(SyncReceipt {
        new_head: commit,
        quads: fresh.len(),
        base_updated_to: base,
    })
}

/// Three-way merge of add-only fact sets: the union of both sides.
pub fn merge_factsets(_base: &FactSet, a: &FactSet, b: &FactSet) -> FactSet {
    a.union(b)
}
