//! Content-addressed, append-only object storage and the commit DAG.
//!
//! On-disk layout under a repository root:
//!
//! ```text
//! objects/<2 hex>/<62 hex>   raw object bytes: `kind SP len \n body`
//! refs/heads/master          64 hex + `\n`
//! refs/remotes/<name>
//! refs/base/<name>
//! meta/owner                 principal + `\n`
//! meta/tokens                lines `principal SP token`
//! lock                       advisory lock for ref updates
//! ```
//!
//! A commit body is a sequence of `\n` terminated lines:
//! `tree <hex>`, zero to two `parent <hex>` (ascending), `author <principal>`,
//! `seq <decimal>` and `msg "<escaped>"`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{parse_fact_line, push_quoted, FactSet, Principal, Term};

/// SHA-256 digest of an object's stored bytes (header included).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hash([u8; 32]);

impl Hash {
    pub fn of_bytes(bytes: &[u8]) -> Hash {
        Hash(Sha256::digest(bytes).into())
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for Hash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Hash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hash({})", &self.to_hex()[..12])
    }
}

impl FromStr for Hash {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidCommit(format!("not a 64-char lowercase hex hash: {s:?}"));
        if s.len() != 64 || !s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return Err(bad());
        }
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).map_err(|_| bad())?;
        Ok(Hash(out))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectKind {
    FactSet,
    Commit,
}

impl ObjectKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectKind::FactSet => "factset",
            ObjectKind::Commit => "commit",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "factset" => Some(ObjectKind::FactSet),
            "commit" => Some(ObjectKind::Commit),
            _ => None,
        }
    }
}

/// Full stored representation of an object: header plus body.
pub fn object_bytes(kind: ObjectKind, body: &[u8]) -> Vec<u8> {
    let mut out = format!("{} {}\n", kind.as_str(), body.len()).into_bytes();
    out.extend_from_slice(body);
    out
}

/// Address of `body` stored as `kind`, without touching any store.
pub fn object_hash(kind: ObjectKind, body: &[u8]) -> Hash {
    Hash::of_bytes(&object_bytes(kind, body))
}

/// Address of a fact set's tree object.
pub fn factset_hash(fs: &FactSet) -> Hash {
    object_hash(ObjectKind::FactSet, &fs.canonical_bytes())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Commit {
    pub parents: Vec<Hash>,
    pub tree: Hash,
    pub author: Principal,
    pub seq: u64,
    pub message: String,
}

impl Commit {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        out.push_str("tree ");
        out.push_str(&self.tree.to_hex());
        out.push('\n');
        for p in &self.parents {
            out.push_str("parent ");
            out.push_str(&p.to_hex());
            out.push('\n');
        }
        out.push_str("author ");
        out.push_str(self.author.as_str());
        out.push('\n');
        out.push_str(&format!("seq {}\n", self.seq));
        out.push_str("msg ");
        push_quoted(&mut out, &self.message);
        out.push('\n');
        out.into_bytes()
    }

    pub fn parse(body: &[u8]) -> Result<Commit> {
        let bad = |why: &str| Error::InvalidCommit(why.to_string());
        let text = std::str::from_utf8(body).map_err(|_| bad("commit is not UTF-8"))?;
        let text = text
            .strip_suffix('\n')
            .ok_or_else(|| bad("commit not newline terminated"))?;
        let mut lines = text.split('\n').peekable();
        let field = |line: Option<&str>, key: &str| -> Result<String> {
            line.and_then(|l| l.strip_prefix(key))
                .and_then(|l| l.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| Error::InvalidCommit(format!("missing `{key}` line")))
        };
        let tree: Hash = field(lines.next(), "tree")?.parse()?;
        let mut parents = Vec::new();
        while lines.peek().is_some_and(|l| l.starts_with("parent ")) {
            parents.push(field(lines.next(), "parent")?.parse()?);
        }
        let author = Principal::new(field(lines.next(), "author")?)?;
        let seq = field(lines.next(), "seq")?
            .parse::<u64>()
            .map_err(|_| bad("bad seq"))?;
        let message = match Term::decode(&field(lines.next(), "msg")?) {
            Ok(Term::Literal(m)) => m,
            _ => return Err(bad("bad msg")),
        };
        if lines.next().is_some() {
            return Err(bad("trailing lines in commit"));
        }
        let commit = Commit {
            parents,
            tree,
            author,
            seq,
            message,
        };
        if commit.to_bytes() != body {
            return Err(bad("commit is not in canonical form"));
        }
        Ok(commit)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum RefName {
    /// `refs/heads/master`
    Master,
    /// `refs/remotes/<name>`
    Remote(String),
    /// `refs/base/<name>`: last synchronized filtered snapshot of a master.
    Base(String),
}

impl RefName {
    fn validate(&self) -> Result<()> {
        match self {
            RefName::Master => Ok(()),
            RefName::Remote(n) | RefName::Base(n) => {
                let ok = !n.is_empty()
                    && n != "."
                    && n != ".."
                    && n.chars()
                        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
                if ok {
                    Ok(())
                } else {
                    Err(Error::InvalidCommit(format!("bad ref name {n:?}")))
                }
            }
        }
    }

    fn rel_path(&self) -> PathBuf {
        match self {
            RefName::Master => PathBuf::from("refs/heads/master"),
            RefName::Remote(n) => Path::new("refs/remotes").join(n),
            RefName::Base(n) => Path::new("refs/base").join(n),
        }
    }
}

impl fmt::Display for RefName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.rel_path().display())
    }
}

/// Name of the remote that a clone synchronizes with.
pub const ORIGIN: &str = "origin";

/// Held while ref updates are in progress; released on drop.
#[derive(Debug)]
pub struct RepoLock {
    file: File,
}

impl Drop for RepoLock {
    fn drop(&mut self) {
        let _ = self.file.unlock();
    }
}

/// Handle on a repository directory.
#[derive(Clone, Debug)]
pub struct Repo {
    root: PathBuf,
    owner: Principal,
}

impl Repo {
    /// Creates an empty layout (no commits, no refs). `root` must be absent
    /// or an empty directory.
    pub fn create_layout(root: impl AsRef<Path>, owner: &Principal) -> Result<Repo> {
        let root = root.as_ref().to_path_buf();
        match fs::read_dir(&root) {
            Ok(mut entries) => {
                if entries.next().is_some() {
                    return Err(Error::PathNotEmpty(root));
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) if e.kind() == io::ErrorKind::NotADirectory => {
                return Err(Error::PathNotEmpty(root))
            }
            Err(e) => return Err(Error::storage(&root, e)),
        }
        for dir in ["objects", "refs/heads", "refs/remotes", "refs/base", "meta"] {
            let p = root.join(dir);
            fs::create_dir_all(&p).map_err(|e| Error::storage(&p, e))?;
        }
        write_atomic(&root.join("meta/owner"), format!("{owner}\n").as_bytes())?;
        write_atomic(&root.join("meta/tokens"), b"")?;
        let lock = root.join("lock");
        File::create(&lock).map_err(|e| Error::storage(&lock, e))?;
        Ok(Repo {
            root,
            owner: owner.clone(),
        })
    }

    pub fn open(root: impl AsRef<Path>) -> Result<Repo> {
        let root = root.as_ref().to_path_buf();
        let owner_path = root.join("meta/owner");
        let text = fs::read_to_string(&owner_path).map_err(|e| Error::storage(&owner_path, e))?;
        let owner = Principal::new(text.trim_end_matches('\n'))?;
        Ok(Repo { root, owner })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn owner(&self) -> &Principal {
        &self.owner
    }

    /// Blocks until the repository's advisory lock is held.
    pub fn lock(&self) -> Result<RepoLock> {
        let path = self.root.join("lock");
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(|e| Error::storage(&path, e))?;
        file.lock().map_err(|e| Error::storage(&path, e))?;
        Ok(RepoLock { file })
    }

    fn object_path(&self, hash: &Hash) -> PathBuf {
        let hex = hash.to_hex();
        self.root.join("objects").join(&hex[..2]).join(&hex[2..])
    }

    pub fn has_object(&self, hash: &Hash) -> bool {
        self.object_path(hash).is_file()
    }

    /// Stores `body` as an object of `kind`. Existing objects are never rewritten.
    pub fn put_object(&self, kind: ObjectKind, body: &[u8]) -> Result<Hash> {
        let bytes = object_bytes(kind, body);
        let hash = Hash::of_bytes(&bytes);
        let path = self.object_path(&hash);
        if path.exists() {
            return Ok(hash);
        }
        let dir = path.parent().expect("object path has a parent");
        fs::create_dir_all(dir).map_err(|e| Error::storage(dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::storage(dir, e))?;
        tmp.write_all(&bytes)
            .and_then(|_| tmp.as_file().sync_all())
            .map_err(|e| Error::storage(tmp.path(), e))?;
        match tmp.persist_noclobber(&path) {
            Ok(_) => Ok(hash),
            Err(e) if e.error.kind() == io::ErrorKind::AlreadyExists => Ok(hash),
            Err(e) => Err(Error::storage(&path, e.error)),
        }
    }

    /// Raw stored bytes (header included), verified against `hash`.
    pub fn read_raw(&self, hash: &Hash) -> Result<Vec<u8>> {
        let path = self.object_path(hash);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(Error::UnknownObject(*hash))
            }
            Err(e) => return Err(Error::storage(&path, e)),
        };
        if Hash::of_bytes(&bytes) != *hash {
            return Err(Error::CorruptObject {
                hash: *hash,
                reason: "digest mismatch".into(),
            });
        }
        Ok(bytes)
    }

    /// Object kind and body, with the digest and header re-verified.
    pub fn get_object(&self, hash: &Hash) -> Result<(ObjectKind, Vec<u8>)> {
        let bytes = self.read_raw(hash)?;
        let corrupt = |reason: &str| Error::CorruptObject {
            hash: *hash,
            reason: reason.into(),
        };
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| corrupt("missing header"))?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| corrupt("bad header"))?;
        let (kind, len) = header
            .split_once(' ')
            .ok_or_else(|| corrupt("bad header"))?;
        let kind = ObjectKind::parse(kind).ok_or_else(|| corrupt("unknown kind"))?;
        let len: usize = len.parse().map_err(|_| corrupt("bad length"))?;
        let body = bytes[nl + 1..].to_vec();
        if body.len() != len {
            return Err(corrupt("length mismatch"));
        }
        Ok((kind, body))
    }

    fn get_kind(&self, hash: &Hash, want: ObjectKind) -> Result<Vec<u8>> {
        let (kind, body) = self.get_object(hash)?;
        if kind != want {
            return Err(Error::CorruptObject {
                hash: *hash,
                reason: format!("expected {}, found {}", want.as_str(), kind.as_str()),
            });
        }
        Ok(body)
    }

    /// Stores the fact set's canonical serialization and returns its address.
    pub fn hash_factset(&self, fs: &FactSet) -> Result<Hash> {
        self.put_object(ObjectKind::FactSet, &fs.canonical_bytes())
    }

    pub fn read_factset(&self, tree: &Hash) -> Result<FactSet> {
        let body = self.get_kind(tree, ObjectKind::FactSet)?;
        let text = std::str::from_utf8(&body).map_err(|_| Error::CorruptObject {
            hash: *tree,
            reason: "fact set is not UTF-8".into(),
        })?;
        let fs: FactSet = text
            .lines()
            .map(parse_fact_line)
            .collect::<Result<_>>()
            .map_err(|e| Error::CorruptObject {
                hash: *tree,
                reason: e.to_string(),
            })?;
        Ok(fs)
    }

    pub fn read_commit(&self, hash: &Hash) -> Result<Commit> {
        let body = self.get_kind(hash, ObjectKind::Commit)?;
        Commit::parse(&body).map_err(|e| Error::CorruptObject {
            hash: *hash,
            reason: e.to_string(),
        })
    }

    /// Stores the tree and a commit over it. Parents are sorted; `seq` is one
    /// more than the largest parent seq, or 0 for a root. No ref moves.
    pub fn create_commit(
        &self,
        parents: &[Hash],
        fs: &FactSet,
        author: &Principal,
        message: &str,
    ) -> Result<Hash> {
        let mut parents = parents.to_vec();
        parents.sort_unstable();
        if parents.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidCommit("duplicate parent".into()));
        }
        if parents.len() > 2 {
            return Err(Error::InvalidCommit(format!(
                "{} parents; at most 2 allowed",
                parents.len()
            )));
        }
        let mut seq = 0;
        for p in &parents {
            let parent = match self.read_commit(p) {
                Ok(c) => c,
                Err(Error::UnknownObject(h)) => return Err(Error::UnknownParent(h)),
                Err(e) => return Err(e),
            };
            seq = seq.max(parent.seq + 1);
        }
        let tree = self.hash_factset(fs)?;
        let commit = Commit {
            parents,
            tree,
            author: author.clone(),
            seq,
            message: message.to_string(),
        };
        self.put_object(ObjectKind::Commit, &commit.to_bytes())
    }

    pub fn resolve_facts(&self, commit: &Hash) -> Result<FactSet> {
        let c = self.read_commit(commit)?;
        self.read_factset(&c.tree)
    }

    /// Every ancestor of `head` (inclusive), children before parents, ties
    /// broken by descending seq then ascending hash.
    pub fn log(&self, head: &Hash) -> Result<Vec<(Hash, Commit)>> {
        let mut seen = BTreeMap::new();
        let mut queue = VecDeque::from([*head]);
        while let Some(h) = queue.pop_front() {
            if seen.contains_key(&h) {
                continue;
            }
            let c = self.read_commit(&h)?;
            queue.extend(c.parents.iter().copied());
            seen.insert(h, c);
        }
        let mut out: Vec<(Hash, Commit)> = seen.into_iter().collect();
        // seq strictly increases from parent to child, so this order is topological
        out.sort_by(|(ha, a), (hb, b)| b.seq.cmp(&a.seq).then(ha.cmp(hb)));
        Ok(out)
    }

    /// Hashes of every ancestor of `head`, inclusive.
    pub fn ancestors(&self, head: &Hash) -> Result<BTreeSet<Hash>> {
        Ok(self.log(head)?.into_iter().map(|(h, _)| h).collect())
    }

    /// A lowest common ancestor of `a` and `b`: the common ancestor with the
    /// largest seq, ties broken by the smallest hash.
    pub fn merge_base(&self, a: &Hash, b: &Hash) -> Result<Option<Hash>> {
        let left = self.log(a)?;
        let right = self.ancestors(b)?;
        // log order already puts the max-seq, min-hash candidate first
        Ok(left.into_iter().map(|(h, _)| h).find(|h| right.contains(h)))
    }

    pub fn read_ref(&self, name: &RefName) -> Result<Option<Hash>> {
        name.validate()?;
        let path = self.root.join(name.rel_path());
        match fs::read_to_string(&path) {
            Ok(text) => {
                let hex = text.strip_suffix('\n').unwrap_or(&text);
                hex.parse().map(Some)
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::storage(&path, e)),
        }
    }

    pub fn head(&self) -> Result<Hash> {
        self.read_ref(&RefName::Master)?
            .ok_or_else(|| Error::InvalidCommit("refs/heads/master is missing".into()))
    }

    /// Points `name` at `target`, which must be a commit in this store.
    /// Callers that race with other writers should hold [`Repo::lock`].
    pub fn write_ref(&self, name: &RefName, target: &Hash) -> Result<()> {
        name.validate()?;
        self.read_commit(target)?;
        write_atomic(
            &self.root.join(name.rel_path()),
            format!("{target}\n").as_bytes(),
        )
    }

    /// Registered `(principal, token)` pairs.
    pub fn tokens(&self) -> Result<Vec<(Principal, String)>> {
        let path = self.root.join("meta/tokens");
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(Error::storage(&path, e)),
        };
        text.lines()
            .filter(|l| !l.is_empty())
            .map(|l| {
                let (p, t) = l.split_once(' ').ok_or_else(|| {
                    Error::storage(
                        &path,
                        io::Error::new(io::ErrorKind::InvalidData, "bad token line"),
                    )
                })?;
                Ok((Principal::new(p)?, t.to_string()))
            })
            .collect()
    }

    /// Registers or replaces the token for `principal`.
    pub fn set_token(&self, principal: &Principal, token: &str) -> Result<()> {
        if token.is_empty() || token.chars().any(char::is_whitespace) {
            return Err(Error::InvalidTerm(
                "token must be non-empty and contain no whitespace".into(),
            ));
        }
        let _guard = self.lock()?;
        let mut table = self.tokens()?;
        table.retain(|(p, _)| p != principal);
        table.push((principal.clone(), token.to_string()));
        table.sort();
        let body: String = table.iter().map(|(p, t)| format!("{p} {t}\n")).collect();
        write_atomic(&self.root.join("meta/tokens"), body.as_bytes())
    }

    /// Every stored object hash.
    pub fn object_hashes(&self) -> Result<Vec<Hash>> {
        let objects = self.root.join("objects");
        let mut out = Vec::new();
        let dirs = fs::read_dir(&objects).map_err(|e| Error::storage(&objects, e))?;
        for dir in dirs {
            let dir = dir.map_err(|e| Error::storage(&objects, e))?;
            let prefix = dir.file_name().to_string_lossy().into_owned();
            let entries = fs::read_dir(dir.path()).map_err(|e| Error::storage(dir.path(), e))?;
            for entry in entries {
                let entry = entry.map_err(|e| Error::storage(dir.path(), e))?;
                let name = format!("{prefix}{}", entry.file_name().to_string_lossy());
                // temp files from interrupted writes are not objects
                if let Ok(h) = name.parse() {
                    out.push(h);
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    pub fn object_count(&self) -> Result<usize> {
        Ok(self.object_hashes()?.len())
    }

    /// Verifies that every stored object's digest matches its address.
    pub fn audit(&self) -> Result<usize> {
        let hashes = self.object_hashes()?;
        for h in &hashes {
            self.get_object(h)?;
        }
        Ok(hashes.len())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().expect("ref path has a parent");
    fs::create_dir_all(dir).map_err(|e| Error::storage(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::storage(dir, e))?;
    tmp.write_all(bytes)
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| Error::storage(path, e))?;
    tmp.persist(path)
        .map_err(|e| Error::storage(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Quad;

    fn principal(s: &str) -> Principal {
        Principal::new(s).unwrap()
    }

    fn quad(s: &str, p: &str, o: &str, a: &str) -> Quad {
        Quad::parse_parts(s, p, o, a).unwrap()
    }

    fn repo() -> (tempfile::TempDir, Repo) {
        let dir = tempfile::tempdir().unwrap();
        let repo = Repo::create_layout(dir.path().join("r"), &principal("alice")).unwrap();
        (dir, repo)
    }

    #[test]
    fn empty_factset_address() {
        // sha256("factset 0\n")
        let expected = "741ef6aad4b936e2fc86fd2acee26c340407cd84bb9e1f949b3b950deab050c0";
        let (_d, repo) = repo();
        let h1 = repo.put_object(ObjectKind::FactSet, b"").unwrap();
        let h2 = repo.put_object(ObjectKind::FactSet, b"").unwrap();
        assert_eq!(h1, h2);
        assert_eq!(h1.to_hex(), expected);
        assert_eq!(repo.object_count().unwrap(), 1);
    }

    #[test]
    fn put_get_round_trip() {
        let (_d, repo) = repo();
        let body = b"arbitrary commit body bytes".to_vec();
        let h = repo.put_object(ObjectKind::Commit, &body).unwrap();
        assert_eq!(repo.get_object(&h).unwrap(), (ObjectKind::Commit, body));
    }

    #[test]
    fn hash_parse_rejects_uppercase_and_length() {
        let h = Hash::of_bytes(b"x");
        assert_eq!(h.to_hex().parse::<Hash>().unwrap(), h);
        assert!(h.to_hex().to_uppercase().parse::<Hash>().is_err());
        assert!("abc".parse::<Hash>().is_err());
    }

    #[test]
    fn commit_is_deterministic_and_parent_order_free() {
        let (_d, repo) = repo();
        let a = principal("alice");
        let root = repo
            .create_commit(&[], &FactSet::new(), &a, "init")
            .unwrap();
        assert_eq!(
            root,
            repo.create_commit(&[], &FactSet::new(), &a, "init")
                .unwrap()
        );
        let fs1: FactSet = [quad("x", "p", "1", "alice")].into_iter().collect();
        let fs2: FactSet = [quad("y", "p", "2", "alice")].into_iter().collect();
        let h1 = repo.create_commit(&[root], &fs1, &a, "one").unwrap();
        let h2 = repo.create_commit(&[root], &fs2, &a, "two").unwrap();
        let m1 = repo
            .create_commit(&[h2, h1], &fs1.union(&fs2), &a, "merge")
            .unwrap();
        let m2 = repo
            .create_commit(&[h1, h2], &fs1.union(&fs2), &a, "merge")
            .unwrap();
        assert_eq!(m1, m2);
        let c = repo.read_commit(&m1).unwrap();
        assert_eq!(c.seq, 2);
        assert!(c.parents[0] < c.parents[1]);
    }

    #[test]
    fn commit_errors() {
        let (_d, repo) = repo();
        let a = principal("alice");
        let ghost = Hash::of_bytes(b"ghost");
        assert!(matches!(
            repo.create_commit(&[ghost], &FactSet::new(), &a, "x"),
            Err(Error::UnknownParent(h)) if h == ghost
        ));
        let root = repo
            .create_commit(&[], &FactSet::new(), &a, "init")
            .unwrap();
        assert!(matches!(
            repo.create_commit(&[root, root], &FactSet::new(), &a, "x"),
            Err(Error::InvalidCommit(_))
        ));
    }

    #[test]
    fn commit_message_escaping_round_trips() {
        let c = Commit {
            parents: vec![],
            tree: Hash::of_bytes(b"t"),
            author: principal("bob"),
            seq: 7,
            message: "multi\nline \"quoted\" \\".into(),
        };
        assert_eq!(Commit::parse(&c.to_bytes()).unwrap(), c);
    }

    #[test]
    fn commit_layout() {
        let c = Commit {
            parents: vec![],
            tree: factset_hash(&FactSet::new()),
            author: principal("alice"),
            seq: 0,
            message: "init".into(),
        };
        let text = String::from_utf8(c.to_bytes()).unwrap();
        assert_eq!(
            text,
            format!(
                "tree {}\nauthor alice\nseq 0\nmsg \"init\"\n",
                factset_hash(&FactSet::new())
            )
        );
    }

    #[test]
    fn resolve_round_trip_and_empty() {
        let (_d, repo) = repo();
        let a = principal("alice");
        let root = repo
            .create_commit(&[], &FactSet::new(), &a, "init")
            .unwrap();
        assert!(repo.resolve_facts(&root).unwrap().is_empty());
        let fs: FactSet = [
            quad("a", "b", "c", "x"),
            quad("a", "b", "\"lit \\\" q\"", "y"),
        ]
        .into_iter()
        .collect();
        let h = repo.create_commit(&[root], &fs, &a, "m").unwrap();
        assert_eq!(repo.resolve_facts(&h).unwrap(), fs);
    }

    #[test]
    fn tampered_object_is_corrupt() {
        let (_d, repo) = repo();
        let a = principal("alice");
        let fs: FactSet = [quad("a", "b", "c", "x")].into_iter().collect();
        let h = repo.create_commit(&[], &fs, &a, "m").unwrap();
        let tree = repo.read_commit(&h).unwrap().tree;
        let path = repo.object_path(&tree);
        let mut bytes = fs::read(&path).unwrap();
        *bytes.last_mut().unwrap() = b'X';
        fs::write(&path, bytes).unwrap();
        assert!(matches!(
            repo.resolve_facts(&h),
            Err(Error::CorruptObject { .. })
        ));
        assert!(repo.audit().is_err());
    }

    #[test]
    fn unknown_object() {
        let (_d, repo) = repo();
        let ghost = Hash::of_bytes(b"nothing");
        assert!(matches!(
            repo.read_commit(&ghost),
            Err(Error::UnknownObject(_))
        ));
    }

    #[test]
    fn log_linear_and_merge() {
        let (_d, repo) = repo();
        let a = principal("alice");
        let fs = FactSet::new();
        let c0 = repo.create_commit(&[], &fs, &a, "0").unwrap();
        let c1 = repo.create_commit(&[c0], &fs, &a, "1").unwrap();
        let c2 = repo.create_commit(&[c1], &fs, &a, "2").unwrap();
        let hashes: Vec<Hash> = repo.log(&c2).unwrap().into_iter().map(|(h, _)| h).collect();
        assert_eq!(hashes, vec![c2, c1, c0]);

        let b1 = repo.create_commit(&[c0], &fs, &a, "b1").unwrap();
        let m = repo.create_commit(&[c2, b1], &fs, &a, "merge").unwrap();
        let log = repo.log(&m).unwrap();
        assert_eq!(log.len(), 5);
        assert_eq!(log.iter().filter(|(h, _)| *h == c0).count(), 1);
        assert_eq!(log[0].0, m);
        assert_eq!(log.last().unwrap().0, c0);
    }

    #[test]
    fn merge_base_cases() {
        let (_d, repo) = repo();
        let a = principal("alice");
        let fs = FactSet::new();
        let c0 = repo.create_commit(&[], &fs, &a, "0").unwrap();
        let c1 = repo.create_commit(&[c0], &fs, &a, "1").unwrap();
        let c2 = repo.create_commit(&[c0], &fs, &a, "2").unwrap();
        let c3 = repo.create_commit(&[c1, c2], &fs, &a, "3").unwrap();
        assert_eq!(repo.merge_base(&c1, &c1).unwrap(), Some(c1));
        assert_eq!(repo.merge_base(&c1, &c2).unwrap(), Some(c0));
        assert_eq!(repo.merge_base(&c3, &c2).unwrap(), Some(c2));
        let other = repo.create_commit(&[], &fs, &a, "other root").unwrap();
        assert_eq!(repo.merge_base(&c3, &other).unwrap(), None);
    }

    #[test]
    fn refs_and_tokens() {
        let (_d, repo) = repo();
        let a = principal("alice");
        assert_eq!(repo.read_ref(&RefName::Master).unwrap(), None);
        let c0 = repo.create_commit(&[], &FactSet::new(), &a, "0").unwrap();
        repo.write_ref(&RefName::Master, &c0).unwrap();
        repo.write_ref(&RefName::Base(ORIGIN.into()), &c0).unwrap();
        assert_eq!(repo.head().unwrap(), c0);
        let on_disk = fs::read_to_string(repo.root().join("refs/base/origin")).unwrap();
        assert_eq!(on_disk, format!("{c0}\n"));
        assert!(repo
            .write_ref(&RefName::Master, &Hash::of_bytes(b"nope"))
            .is_err());

        repo.set_token(&principal("bob"), "t1").unwrap();
        repo.set_token(&principal("bob"), "t2").unwrap();
        repo.set_token(&principal("carol"), "t3").unwrap();
        assert_eq!(
            repo.tokens().unwrap(),
            vec![
                (principal("bob"), "t2".to_string()),
                (principal("carol"), "t3".to_string())
            ]
        );
        assert!(repo.set_token(&principal("bob"), "").is_err());
        assert_eq!(
            fs::read_to_string(repo.root().join("meta/owner")).unwrap(),
            "alice\n"
        );
    }

    #[test]
    fn layout_requires_empty_path() {
        let (dir, repo) = repo();
        assert!(matches!(
            Repo::create_layout(repo.root(), &principal("x")),
            Err(Error::PathNotEmpty(_))
        ));
        let empty = dir.path().join("empty");
        fs::create_dir(&empty).unwrap();
        assert!(Repo::create_layout(&empty, &principal("x")).is_ok());
    }
}
