"""Bindings behave as thin wrappers: handle lifetime semantics, marshalling
of facts/steps as text and tuples, and byte-level parity of proof
serializations with the command-line prove/generate outputs."""

import glob
import io
import os
import sys
from contextlib import redirect_stderr, redirect_stdout

import pytest

import geodeduce_bindings as gb
from geodeduce.cli import main as cli_main

PROBLEM_DIR = os.path.join(os.path.dirname(__file__), "..", "..", "problems")
PROBLEM_FILES = sorted(glob.glob(os.path.join(PROBLEM_DIR, "*.geo")))

MIDLINE = open(os.path.join(PROBLEM_DIR, "midline.geo")).read()

CONVERSE_THALES_AUX = """free A
free B
free T
foot C : A B T
?- cong O A O C"""


def _parse_midline():
    return gb.parse(MIDLINE, allow_undefined_goal_points=True)


# ---------------------------------------------------------------------------
# handle lifetime


def test_release_invalidates_problem_handle():
    h = _parse_midline()
    assert h.serialize()
    h.release()
    assert h.released
    with pytest.raises(gb.InvalidHandle):
        h.serialize()
    with pytest.raises(gb.InvalidHandle):
        _ = h.goal
    h.release()  # releasing twice is a no-op, never a crash


def test_release_invalidates_db_dag_result_handles():
    h = _parse_midline()
    db = gb.saturate(h)
    dag = gb.trace(db, h.goal, minimize_for=h)
    res = gb.solve(h)
    for handle, op in (
        (db, lambda: gb.query(db, "coll A B C")),
        (dag, dag.serialize),
        (res, res.serialize),
    ):
        handle.release()
        with pytest.raises(gb.InvalidHandle):
            op()


def test_operations_on_live_handles_after_sibling_release():
    a = _parse_midline()
    b = _parse_midline()
    a.release()
    assert b.serialize()  # handles are independent


# ---------------------------------------------------------------------------
# marshalling


def test_query_accepts_text_and_tuples():
    h = _parse_midline()
    db = gb.saturate(h)
    goal = h.goal
    assert gb.query(db, goal)
    assert gb.query(db, tuple(goal.split()))
    assert not gb.query(db, "cyclic A B C M")
    assert any(f == goal for f in db.facts())


def test_parse_errors_are_the_cores():
    from geodeduce.problem import ParseError
    with pytest.raises(ParseError):
        gb.parse("free A\n?- coll A B C")


def test_check_proof_accepts_text_dag_and_aux_lines():
    h = gb.parse(CONVERSE_THALES_AUX, allow_undefined_goal_points=True)
    res = gb.solve(h, policy="exhaustive", expand_k=16, max_steps=2,
                   threads=1)
    assert res.solved and res.aux
    text = res.proof().serialize()
    ok, reasons = gb.check_proof(h, text, aux=res.aux)
    assert ok, reasons
    bad, reasons = gb.check_proof(h, text)  # aux withheld: steps out of range
    assert not bad and reasons


# ---------------------------------------------------------------------------
# parity with the command line


def _cli(argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = cli_main(argv)
    return code, out.getvalue(), err.getvalue()


@pytest.mark.parametrize("path", PROBLEM_FILES,
                         ids=[os.path.basename(p) for p in PROBLEM_FILES])
def test_proof_serialization_matches_cli(path, tmp_path):
    proof = tmp_path / "proof.txt"
    code, _, _ = _cli(["prove", "--problem", path, "--out", str(proof)])
    assert code == 0
    h = gb.parse(open(path).read(), allow_undefined_goal_points=True)
    res = gb.solve(h)
    assert res.solved
    assert res.serialize() == proof.read_text()


def test_aux_search_serialization_matches_cli(tmp_path):
    prob = tmp_path / "p.geo"
    prob.write_text(CONVERSE_THALES_AUX)
    proof = tmp_path / "proof.txt"
    code, _, _ = _cli([
        "prove", "--problem", str(prob), "--policy", "exhaustive",
        "--expand-k", "16", "--max-steps", "2", "--threads", "1",
        "--out", str(proof),
    ])
    assert code == 0
    h = gb.parse(CONVERSE_THALES_AUX, allow_undefined_goal_points=True)
    res = gb.solve(h, policy="exhaustive", expand_k=16, max_steps=2,
                   threads=1)
    assert res.serialize() == proof.read_text()


def test_generate_matches_cli(tmp_path):
    out = tmp_path / "gen.txt"
    code, _, _ = _cli([
        "generate", "--count", "3", "--seed", "11", "--threads", "1",
        "--out", str(out),
    ])
    assert code == 0
    records = list(gb.generate(count=3, seed=11))
    assert len(records) == 3
    assert "".join(r + "\n\n" for r in records) == out.read_text()


def test_generate_store_skips_previous_run(tmp_path):
    store = str(tmp_path / "store")
    first = list(gb.generate(count=3, seed=11, store=store))
    again = list(gb.generate(count=3, seed=11, store=store))
    assert len(first) == 3 and again == []
