"""Proposal policies: built-ins and the external line protocol."""
import math
import sys
import textwrap

import pytest

from geodeduce.policy import (ExhaustivePolicy, ExternalPolicy,
                              HeuristicPolicy, PolicyContext,
                              PolicyUnavailable, enumerate_applications,
                              make_policy, score_path)
from geodeduce.problem import parse_steps

TRIANGLE = "free A; free B; free C"


def ctx(problem=TRIANGLE, aux=(), k=8):
    return PolicyContext(problem=problem, aux_so_far=tuple(aux), k=k)


def test_exhaustive_deterministic_and_sorted():
    pol = ExhaustivePolicy()
    a = pol.propose(ctx())
    b = pol.propose(ctx())
    assert a == b
    texts = [str(p.step) for p in a]
    assert texts == sorted(texts)
    assert len(a) <= 8


def test_exhaustive_uniform_logprobs():
    pol = ExhaustivePolicy()
    props = pol.propose(ctx(k=4))
    assert len({p.logprob for p in props}) == 1
    assert all(p.logprob <= 0 for p in props)


def test_exhaustive_respects_k():
    pol = ExhaustivePolicy()
    assert len(pol.propose(ctx(k=2))) == 2


def test_proposals_do_not_duplicate_existing_steps():
    pol = ExhaustivePolicy(actions=("midpoint",))
    existing = "free A; free B; free C; midpoint M : A B"
    props = pol.propose(ctx(problem=existing, k=32))
    ins = {tuple(sorted(p.step.inputs)) for p in props}
    assert ("A", "B") not in ins
    assert {("A", "C"), ("B", "C")} <= ins


def test_proposal_outputs_are_fresh():
    pol = ExhaustivePolicy()
    for p in pol.propose(ctx(k=32)):
        assert not set(p.step.outputs) & {"A", "B", "C"}


def test_heuristic_normalized():
    pol = HeuristicPolicy()
    props = pol.propose(ctx(k=64))
    assert props
    assert all(p.logprob < 0 for p in props)
    # weights favour midpoints over incenters
    by_action = {p.step.action: p.logprob for p in props}
    if "midpoint" in by_action and "incenter" in by_action:
        assert by_action["midpoint"] > by_action["incenter"]


def test_heuristic_restricted_weights():
    pol = HeuristicPolicy(weights={"midpoint": 1.0})
    props = pol.propose(ctx(k=32))
    assert props and all(p.step.action == "midpoint" for p in props)


def test_enumerate_applications_input_symmetry():
    steps = parse_steps(TRIANGLE)
    apps = enumerate_applications(steps, ("midpoint",))
    # midpoint is symmetric: 3 unordered pairs, not 6 ordered ones
    assert len(apps) == 3


def test_score_path_additive():
    pol = ExhaustivePolicy()
    props = pol.propose(ctx(k=3))
    assert score_path(props) == pytest.approx(-sum(p.logprob for p in props))


def test_make_policy_dispatch():
    assert make_policy("none") is None
    assert make_policy(None) is None
    assert isinstance(make_policy("exhaustive"), ExhaustivePolicy)
    assert isinstance(make_policy("heuristic"), HeuristicPolicy)
    assert isinstance(make_policy("exec:cat"), ExternalPolicy)
    with pytest.raises(ValueError):
        make_policy("quantum")


STUB_OK = textwrap.dedent("""\
    import sys
    rid = None
    for line in sys.stdin:
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "PROPOSE":
            rid = tok[1]
        elif tok[0] == "END":
            print(f"OK {rid} 2")
            print("P -0.5 midpoint X1 : A B")
            print("P -1.5 circumcenter X1 : A B C")
            print(f"END {rid}")
            sys.stdout.flush()
    """)

STUB_MALFORMED = STUB_OK.replace('"P -0.5 midpoint X1 : A B"',
                                 '"P banana midpoint X1 : A B"')
STUB_POSITIVE = STUB_OK.replace("P -0.5", "P 0.5")
STUB_ERR = textwrap.dedent("""\
    import sys
    for line in sys.stdin:
        tok = line.split()
        if tok and tok[0] == "END":
            print(f"ERR {tok[1]} overloaded")
            sys.stdout.flush()
    """)


def _exec_policy(tmp_path, code, name):
    script = tmp_path / name
    script.write_text(code)
    return make_policy(f"exec:{sys.executable} -u {script}", timeout=20.0)


def test_external_policy_roundtrip(tmp_path):
    pol = _exec_policy(tmp_path, STUB_OK, "ok.py")
    try:
        props = pol.propose(ctx(k=4))
        assert [str(p.step) for p in props] == [
            "midpoint X1 : A B", "circumcenter X1 : A B C"]
        assert props[0].logprob == pytest.approx(-0.5)
        # a second request reuses the session
        assert pol.propose(ctx(k=4)) == props
    finally:
        pol.close()


def test_external_policy_malformed_line(tmp_path):
    pol = _exec_policy(tmp_path, STUB_MALFORMED, "bad.py")
    try:
        with pytest.raises(PolicyUnavailable) as ei:
            pol.propose(ctx())
        assert "banana" in str(ei.value)
    finally:
        pol.close()


def test_external_policy_positive_logprob(tmp_path):
    pol = _exec_policy(tmp_path, STUB_POSITIVE, "pos.py")
    try:
        with pytest.raises(PolicyUnavailable):
            pol.propose(ctx())
    finally:
        pol.close()


def test_external_policy_err_response(tmp_path):
    pol = _exec_policy(tmp_path, STUB_ERR, "err.py")
    try:
        with pytest.raises(PolicyUnavailable) as ei:
            pol.propose(ctx())
        assert "overloaded" in str(ei.value)
    finally:
        pol.close()


def test_external_policy_dead_process():
    pol = make_policy(f"exec:{sys.executable} -c pass", timeout=5.0)
    try:
        with pytest.raises(PolicyUnavailable):
            pol.propose(ctx())
    finally:
        pol.close()


def test_context_steps_include_aux():
    steps = parse_steps(TRIANGLE)
    aux = parse_steps("midpoint M : A B", defined={"A", "B", "C"})
    c = PolicyContext(problem=TRIANGLE, aux_so_far=tuple(aux), k=4)
    assert c.steps() == tuple(steps) + tuple(aux)
