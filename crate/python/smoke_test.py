"""Smoke test for the Python bindings. Run after `pip install -e crates/python --no-build-isolation`."""

from pathlib import Path

import pathcheck

CORPUS = Path(__file__).resolve().parent.parent / "crates" / "core" / "corpus"

SOURCE = """
assume A : Type
assume a : A
assume b : A
assume p : Id A a b
assume D : (x : A) (y : A) (z : Id A x y) Type
assume d : (x : A) D x x (refl A x)
check J A [x y z => D x y z] [x => d x] a b p : D a b p
eq J A [x y z => D x y z] [x => d x] a a (refl A a) = d a : D a a (refl A a)
eq a = b : A
"""


def main():
    prog = pathcheck.parse(SOURCE)
    assert len(prog) == 3, prog
    assert len(prog.declarations) == 6

    verdicts = pathcheck.check(SOURCE)
    assert [bool(v) for v in verdicts] == [True, True, False], verdicts
    assert verdicts[0].trace and verdicts[2].reason
    assert all(pathcheck.check(SOURCE, extensional=True))

    report = pathcheck.check_files(str(CORPUS / "rules.mltt"))
    assert report["tool"] == "pathcheck"
    assert all(g["status"] == "accepted" for g in report["goals"])

    paths = (CORPUS / "paths.mltt").read_text()
    interp = pathcheck.interpret(paths, preset="interval")
    assert interp["goals"][0]["witness"]["type"]["total"]["objects"] == 4

    cm = pathcheck.demo("countermodel")["goals"][0]
    assert cm["status"] == "passed" and cm["witness"]["fiber_objects"] == 1

    lift = pathcheck.hom(example="lift-interval")["goals"][0]
    assert lift["status"] == "passed"
    query = (CORPUS / "queries" / "classify_diagonal.json").read_text()
    assert pathcheck.hom(query)["goals"][0]["status"] == "passed"

    i = pathcheck.Groupoid.interval()
    po, ok = i.path_object()
    assert ok and po.objects == 4
    assert pathcheck.Groupoid.from_json(i.to_json()) == i

    try:
        pathcheck.parse("check lam (x : A : A")
    except ValueError:
        pass
    else:
        raise AssertionError("parse error not raised")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
