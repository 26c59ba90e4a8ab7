use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use iv_core::model::canonical_serialize;
use iv_core::{chain_eval, parse_query, Principal, Repo};

fn iv_in(env: &[(&str, &Path)], args: &[&str], stdin: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_iv"));
    cmd.args(args).env_remove("IV_REPO");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    let mut child = cmd.spawn().unwrap();
    let mut input = child.stdin.take().unwrap();
    input.write_all(stdin.unwrap_or("").as_bytes()).unwrap();
    drop(input);
    child.wait_with_output().unwrap()
}

fn iv(args: &[&str]) -> Output {
    iv_in(&[], args, None)
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const FACTS: &str = "<photo1> <type> <Photo> @alice\n\
<photo1> <caption> \"Beach\" @alice\n\
<alice> <ssn> \"078-05-1120\" @alice\n";

/// Master with facts, a read grant on photos and a comment write grant for bob.
fn setup(dir: &Path) -> std::path::PathBuf {
    let m = dir.join("master");
    ok(iv(&["init", "--owner", "alice", s(&m)]));
    ok(iv_in(
        &[],
        &["add", "--repo", s(&m), "--author", "alice", "-"],
        Some(FACTS),
    ));
    ok(iv(&[
        "grant",
        "--repo",
        s(&m),
        "--grantee",
        "bob",
        "--mode",
        "read",
        "--pattern",
        "?p <type> <Photo>",
        "--pattern",
        "?c <comment_on> ?x",
    ]));
    ok(iv(&[
        "grant",
        "--repo",
        s(&m),
        "--grantee",
        "bob",
        "--mode",
        "write",
        "--pattern",
        "?c <comment_on> ?x",
    ]));
    ok(iv(&[
        "token",
        "--repo",
        s(&m),
        "--principal",
        "bob",
        "--token",
        "t0k",
    ]));
    m
}

#[test]
fn init_add_log() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m");
    let init = ok(iv(&["init", "--owner", "alice", s(&m)]));
    assert!(init.starts_with("head ") && init.lines().count() == 1);
    let log = ok(iv(&["log", "--repo", s(&m)]));
    assert_eq!(log.lines().count(), 1);
    assert!(log.ends_with(" seq=0 author=alice msg=init\n"));

    let fact = dir.path().join("f.txt");
    std::fs::write(&fact, "<a> <b> <c> @alice\n").unwrap();
    let add = ok(iv(&[
        "add",
        "--repo",
        s(&m),
        "--author",
        "alice",
        "--message",
        "first",
        s(&fact),
    ]));
    let log = ok(iv(&["log", "--repo", s(&m)]));
    assert_eq!(log.lines().count(), 2);
    assert_eq!(
        log.lines().next().unwrap()[..64],
        add.trim()["head ".len()..]
    );
    assert!(log
        .lines()
        .next()
        .unwrap()
        .ends_with("seq=1 author=alice msg=first"));
}

#[test]
fn add_errors() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m");
    ok(iv(&["init", "--owner", "alice", s(&m)]));
    let bad = iv_in(
        &[],
        &["add", "--repo", s(&m), "--author", "alice", "-"],
        Some("<a> <b>\n"),
    );
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).starts_with("error: MalformedLine\n"));
    let not_owner = iv_in(
        &[],
        &["add", "--repo", s(&m), "--author", "bob", "-"],
        Some("<a> <b> <c> @bob\n"),
    );
    assert_eq!(not_owner.status.code(), Some(1));
    assert!(stderr(&not_owner).starts_with("error: NotOwner"));
    assert_eq!(ok(iv(&["log", "--repo", s(&m)])).lines().count(), 1);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(iv(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(iv(&["init"]).status.code(), Some(2));
    assert_eq!(
        iv(&[
            "grant",
            "--repo",
            "x",
            "--grantee",
            "b",
            "--mode",
            "admin",
            "--pattern",
            "?s ?p ?o"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn grant_then_policies() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m");
    ok(iv(&["init", "--owner", "alice", s(&m)]));
    ok(iv(&[
        "grant",
        "--repo",
        s(&m),
        "--grantee",
        "bob",
        "--mode",
        "read",
        "--pattern",
        "?s <type> <Photo>",
    ]));
    let pols = ok(iv(&["policies", "--repo", s(&m)]));
    assert_eq!(
        pols,
        "ac:pol-0 grantee=bob mode=read patterns=?s <type> <Photo>\n"
    );
    let bad = iv(&[
        "grant",
        "--repo",
        s(&m),
        "--grantee",
        "bob",
        "--mode",
        "read",
        "--pattern",
        "?s \"lit\" ?o",
    ]);
    assert_eq!(bad.status.code(), Some(2));
    assert_eq!(ok(iv(&["policies", "--repo", s(&m)])).lines().count(), 1);
}

#[test]
fn clone_pull_push_round() {
    let dir = tempfile::tempdir().unwrap();
    let m = setup(dir.path());
    let b = dir.path().join("bob");
    let remote = |cmd: &str| {
        iv(&[
            cmd,
            "--repo",
            s(&b),
            "--from",
            s(&m),
            "--as",
            "bob",
            "--token",
            "t0k",
        ])
    };

    let clone = ok(iv(&[
        "clone",
        "--from",
        s(&m),
        "--as",
        "bob",
        "--token",
        "t0k",
        s(&b),
    ]));
    assert!(clone.ends_with("quads 1\n"), "{clone}");
    assert_eq!(
        ok(iv(&["show", "--repo", s(&b), &clone[5..69]])),
        "<photo1> <type> <Photo> @alice\n"
    );

    ok(iv_in(
        &[],
        &["add", "--repo", s(&m), "--author", "alice", "-"],
        Some("<photo2> <type> <Photo> @alice\n"),
    ));
    let pull = ok(remote("pull"));
    assert!(pull.ends_with("quads 1\n"), "{pull}");

    ok(iv_in(
        &[],
        &["add", "--repo", s(&b), "--author", "bob", "-"],
        Some("<c1> <comment_on> <photo2> @bob\n"),
    ));
    let push = ok(remote("push"));
    assert!(push.ends_with("quads 1\n"), "{push}");
    let master_head = ok(iv(&["log", "--repo", s(&m)]));
    assert!(master_head
        .lines()
        .next()
        .unwrap()
        .ends_with("author=bob msg=push-from bob"));
    assert_eq!(ok(remote("push")).lines().nth(1), Some("quads 0"));
    ok(remote("pull"));

    // unpermitted quad: rejected, master untouched
    let before = ok(iv(&["log", "--repo", s(&m)]));
    ok(iv_in(
        &[],
        &["add", "--repo", s(&b), "--author", "bob", "-"],
        Some("<bob> <ssn> \"1\" @bob\n"),
    ));
    let rejected = remote("push");
    assert_eq!(rejected.status.code(), Some(1));
    assert!(stderr(&rejected).starts_with("error: PushRejected 1 quads\n"));
    assert_eq!(ok(iv(&["log", "--repo", s(&m)])), before);
}

#[test]
fn clone_with_wrong_token_leaves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let m = setup(dir.path());
    let dest = dir.path().join("eve");
    for (who, token) in [("bob", "wrong"), ("eve", "t0k")] {
        let out = iv(&[
            "clone",
            "--from",
            s(&m),
            "--as",
            who,
            "--token",
            token,
            s(&dest),
        ]);
        assert_eq!(out.status.code(), Some(1));
        assert!(stderr(&out).starts_with("error: AuthFailed\n"));
        assert!(!dest.exists());
    }
}

#[test]
fn map_matches_library_and_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let m = setup(dir.path());
    let env = [("IV_REPO", m.as_path())];
    let query = "?p <type> ?t ; ?p <caption> ?c";
    let out = ok(iv_in(&env, &["map", "--as", "alice", query], None));
    assert_eq!(out, "?p=<photo1> ?t=<Photo> ?c=\"Beach\"\n");
    assert_eq!(ok(iv_in(&env, &["map", "--as", "alice", query], None)), out);

    let repo = Repo::open(&m).unwrap();
    let gis = repo.resolve_facts(&repo.head().unwrap()).unwrap();
    let bob = Principal::new("bob").unwrap();
    let q = parse_query("?p ?r ?o").unwrap();
    let mut expected: Vec<String> = chain_eval(&gis, &bob, repo.owner(), &q)
        .iter()
        .map(|b| b.render(q.select()) + "\n")
        .collect();
    expected.sort();
    assert_eq!(
        ok(iv_in(&env, &["map", "--as", "bob", "?p ?r ?o"], None)),
        expected.concat()
    );
    assert_eq!(expected.len(), 1);

    let selected = ok(iv_in(
        &env,
        &["map", "--as", "alice", "--select", "?c", query],
        None,
    ));
    assert_eq!(selected, "?c=\"Beach\"\n");
    assert_eq!(
        ok(iv_in(&env, &["map", "--as", "mallory", "?s ?p ?o"], None)),
        ""
    );
}

#[test]
fn malformed_query_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let m = setup(dir.path());
    for q in ["?p <type", "?s \"p\" ?o", ""] {
        let out = iv(&["map", "--repo", s(&m), "--as", "alice", q]);
        assert_eq!(out.status.code(), Some(2), "{q}");
        assert!(stderr(&out).starts_with("error: MalformedQuery"));
    }
    let out = iv(&[
        "map",
        "--repo",
        s(&m),
        "--as",
        "alice",
        "--select",
        "?zz",
        "?s ?p ?o",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn watch_reports_additions() {
    let dir = tempfile::tempdir().unwrap();
    let m = setup(dir.path());
    let log = ok(iv(&["log", "--repo", s(&m)]));
    let old = &log[..64];
    assert_eq!(
        ok(iv(&[
            "watch",
            "--repo",
            s(&m),
            "--as",
            "bob",
            "--since",
            old,
            "?p <type> <Photo>"
        ])),
        ""
    );
    ok(iv_in(
        &[],
        &["add", "--repo", s(&m), "--author", "alice", "-"],
        Some("<photo2> <type> <Photo> @alice\n<alice> <ssn> \"2\" @alice\n"),
    ));
    let w = ok(iv(&[
        "watch",
        "--repo",
        s(&m),
        "--as",
        "bob",
        "--since",
        old,
        "?p ?r ?o",
    ]));
    assert_eq!(w, "+ ?p=<photo2> ?r=<type> ?o=<Photo>\n");
    let w = ok(iv(&[
        "watch",
        "--repo",
        s(&m),
        "--as",
        "alice",
        "--since",
        old,
        "?p <ssn> ?o",
    ]));
    assert_eq!(w, "+ ?p=<alice> ?o=\"2\"\n");
}

#[test]
fn show_is_canonical_serialization() {
    let dir = tempfile::tempdir().unwrap();
    let m = setup(dir.path());
    let head = ok(iv(&["log", "--repo", s(&m)]))[..64].to_string();
    let repo = Repo::open(&m).unwrap();
    let expected = canonical_serialize(&repo.resolve_facts(&repo.head().unwrap()).unwrap());
    assert_eq!(iv(&["show", "--repo", s(&m), &head]).stdout, expected);

    let missing = iv(&["show", "--repo", s(&m), &"ab".repeat(32)]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).starts_with("error: UnknownObject"));
}

#[test]
fn demo_social_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let work = dir.path().join("w");
    let out = ok(iv(&["demo", "social", "--workdir", s(&work)]));
    assert_eq!(
        std::fs::read_to_string(work.join("report.txt")).unwrap(),
        out
    );
    assert!(out.ends_with("leakage clean\nresult pass\n"));

    let work = dir.path().join("w2");
    let out = ok(iv(&[
        "demo",
        "social",
        "--no-comment-grant",
        "--workdir",
        s(&work),
    ]));
    assert!(
        out.contains("ok push principal=bob expected=Rejected got=Rejected\n"),
        "{out}"
    );
    let out = ok(iv(&[
        "demo",
        "social",
        "--followers",
        "0",
        "--workdir",
        s(&dir.path().join("w3")),
    ]));
    assert!(out.ends_with("result pass\n"));
}

#[test]
fn demo_props_seed_1_500_cases() {
    let out = ok(iv(&["demo", "props", "--seed", "1", "--cases", "500"]));
    assert!(out.starts_with("report props seed=1 cases=500 mutation=none\n"));
    assert!(out.ends_with("violations 0\nresult pass\n"), "{out}");
}

#[test]
fn demo_props_mutation_is_caught() {
    let out = iv(&[
        "demo",
        "props",
        "--seed",
        "1",
        "--cases",
        "60",
        "--mutation",
        "skip-owner-check",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error: PropertyViolation"));
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("counterexample"));
    assert!(report.ends_with("result fail\n"));
}
