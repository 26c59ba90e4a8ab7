use iv_core::access::policy_view;
use iv_core::harness::oracle::{leaked_lines, naive_view, GrantSpec};
use iv_core::model::parse_fact_lines;
use iv_core::sync::{self, Credential};
use iv_core::{parse_query, seal, Error, Mode, Pattern, Principal, RefName};

fn p(s: &str) -> Principal {
    Principal::new(s).unwrap()
}

#[test]
fn clone_pull_push_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let alice = p("alice");
    let bob = p("bob");
    let master = sync::init(dir.path().join("master"), &alice).unwrap();
    let facts = parse_fact_lines(
        "<photo1> <type> <Photo> @alice\n\
         <photo1> <caption> \"beach\" @alice\n\
         <alice> <ssn> \"078-05-1120\" @alice\n",
    )
    .unwrap();
    sync::add(&master, facts.clone(), &alice, "seed").unwrap();
    let read = vec![Pattern::parse("?s <type> <Photo>").unwrap()];
    let write = vec![Pattern::parse("?c <comment_on> ?x").unwrap()];
    sync::grant(&master, &alice, &bob, Mode::Read, read.clone()).unwrap();
    sync::grant(&master, &alice, &bob, Mode::Write, write.clone()).unwrap();
    master.set_token(&bob, "s3cret").unwrap();

    let wrong = Credential::new(bob.clone(), "nope").unwrap();
    assert!(matches!(
        sync::clone(&master, &wrong, dir.path().join("x")),
        Err(Error::AuthFailed)
    ));

    let cred = Credential::new(bob.clone(), "s3cret").unwrap();
    let local = sync::clone(&master, &cred, dir.path().join("bob")).unwrap();
    let gis = master.resolve_facts(&master.head().unwrap()).unwrap();
    let grants = [GrantSpec {
        grantee: "bob".into(),
        mode: Mode::Read,
        patterns: read,
    }];
    let expected = naive_view(&gis, &bob, &alice, &grants);
    assert_eq!(
        local.resolve_facts(&local.head().unwrap()).unwrap(),
        expected
    );
    assert_eq!(policy_view(&gis, &bob, &alice), expected);
    assert!(leaked_lines(&local, &gis.difference(&expected))
        .unwrap()
        .is_empty());

    let comment = parse_fact_lines("<c1> <comment_on> <photo1> @bob\n").unwrap();
    sync::add(&local, comment.clone(), &bob, "comment").unwrap();
    let receipt = sync::push(&local, &master, &cred).unwrap();
    assert_eq!(receipt.quads, 1);
    assert_eq!(master.head().unwrap(), receipt.new_head);

    let before = master.head().unwrap();
    let bad = parse_fact_lines("<bob> <ssn> \"1\" @bob\n").unwrap();
    sync::add(&local, bad, &bob, "bad").unwrap();
    match sync::push(&local, &master, &cred) {
        Err(Error::PushRejected(qs)) => assert_eq!(qs.len(), 1),
        other => panic!("expected rejection, got {other:?}"),
    }
    assert_eq!(master.head().unwrap(), before);

    sync::pull(&local, &master, &cred).unwrap();
    let view = seal(&local, &local.head().unwrap(), &bob).unwrap();
    let answers = view.map(&parse_query("?c <comment_on> <photo1>").unwrap());
    assert_eq!(answers.len(), 1);
    assert!(local
        .read_ref(&RefName::Base("origin".into()))
        .unwrap()
        .is_some());
    assert!(local.audit().is_ok() && master.audit().is_ok());
}
