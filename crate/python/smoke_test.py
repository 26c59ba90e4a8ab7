"""Exercise the Python bindings end to end: owner repo, grants, clone,
pull, push, queries and both demos."""

import sys
import tempfile
from pathlib import Path

import iv


def check(cond, what):
    if not cond:
        sys.exit(f"FAIL {what}")
    print(f"ok {what}")


def main():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        master = iv.init(tmp / "master", "alice")
        check(master.owner == "alice" and len(master.log()) == 1, "init")

        master.add(
            '<photo1> <type> <Photo> @alice\n'
            '<photo1> <caption> "Beach" @alice\n'
            '<alice> <ssn> "078-05-1120" @alice\n',
            "alice",
            "seed",
        )
        master.grant("bob", "read", ["?p <type> <Photo>", "?c <comment_on> ?x"])
        master.grant("bob", "write", ["?c <comment_on> ?x"])
        master.set_token("bob", "t0k")
        check(len(master.policies()) == 2, "grant")

        try:
            iv.clone(master, "bob", "wrong", tmp / "nope")
            check(False, "wrong token rejected")
        except iv.IvError as e:
            check(str(e).startswith("AuthFailed"), "wrong token rejected")
        check(not (tmp / "nope").exists(), "no clone left behind")

        bob = iv.clone(master, "bob", "t0k", tmp / "bob")
        check(bob.show() == "<photo1> <type> <Photo> @alice\n", "clone holds only the view")
        check(b"078-05-1120" not in b"".join(
            p.read_bytes() for p in (tmp / "bob" / "objects").rglob("*") if p.is_file()
        ), "private fact absent from clone store")

        master.add("<photo2> <type> <Photo> @alice\n", "alice")
        head, n = iv.pull(bob, master, "bob", "t0k")
        check(n == 1 and head == bob.head(), "pull")

        bob.add("<c1> <comment_on> <photo2> @bob\n", "bob", "comment")
        _, n = iv.push(bob, master, "bob", "t0k")
        check(n == 1 and "<c1> <comment_on> <photo2> @bob" in master.show(), "push")

        before = master.head()
        bob.add('<bob> <ssn> "1" @bob\n', "bob")
        try:
            iv.push(bob, master, "bob", "t0k")
            check(False, "unpermitted push rejected")
        except iv.IvError as e:
            check(str(e) == "PushRejected 1 quads", "unpermitted push rejected")
        check(master.head() == before, "master unchanged after rejection")

        view = master.seal("bob")
        photos = sorted(b["p"] for b in view.map("?p <type> <Photo>"))
        check(photos == ["<photo1>", "<photo2>"], "sealed view query")
        check(view.map("?x <ssn> ?v") == [], "sealed view hides private facts")

        facts = master.show()
        q = "?p <type> ?t ; ?p <caption> ?c"
        check(iv.eval_map(facts, q) == iv.brute_force_eval(facts, q), "eval_map agrees with oracle")
        check(iv.eval_map(facts, q, "?c") == [{"c": '"Beach"'}], "projection")
        check("ssn" not in iv.policy_view(facts, "bob", "alice"), "policy_view")
        try:
            iv.normalize_query("?p <type")
            check(False, "malformed query")
        except iv.IvError as e:
            check(str(e).startswith("MalformedQuery"), "malformed query")

        passed, report = iv.demo_social(tmp / "social")
        check(passed and report.endswith("result pass\n"), "demo social")
        passed, report = iv.demo_props(1, 20)
        check(passed and passed == iv.demo_props(1, 20)[0] and report == iv.demo_props(1, 20)[1], "demo props")
    print("smoke test passed")


if __name__ == "__main__":
    main()
