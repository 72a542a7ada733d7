"""Proof extraction, minimization, serialization, and the independent checker."""
import pytest

from geodeduce.checker import check_proof
from geodeduce.problem import parse
from geodeduce.saturate import SaturationLimits, saturate_problem
from geodeduce.trace import (DagSyntaxError, minimize, parse_dag,
                             serialize_dag, trace)

from conftest import problem_files, some_diagram

LIMITS = SaturationLimits(timeout=30)


def _prove(path, rules):
    prob = parse(open(path).read())
    d = some_diagram(prob)
    db = saturate_problem(prob, rules, limits=LIMITS, diagram=d)
    assert db.knows(prob.goal), path
    return prob, trace(db, prob.goal)


@pytest.fixture(scope="module")
def midline_proof(rules):
    path = [p for p in problem_files() if p.endswith("midline.geo")][0]
    return _prove(path, rules)


@pytest.mark.parametrize("path", problem_files())
def test_named_theorem_traces_check(path, rules):
    prob, dag = _prove(path, rules)
    assert check_proof(prob, dag, rules), path


@pytest.mark.parametrize("path", problem_files())
def test_minimized_proofs_check(path, rules):
    prob, dag = _prove(path, rules)
    mdag = minimize(prob, dag, rules)
    assert check_proof(prob, mdag, rules), path
    assert set(mdag.used_constructions) <= set(dag.used_constructions)


def test_serialize_roundtrip(midline_proof):
    _, dag = midline_proof
    text = serialize_dag(dag)
    assert serialize_dag(parse_dag(text)) == text


def test_parse_dag_rejects_garbage():
    with pytest.raises(DagSyntaxError):
        parse_dag("goal para B C M N\nnonsense line\n")
    with pytest.raises(DagSyntaxError):
        parse_dag("fact para B C M N by r04 from 7\n")


def _mutations(text):
    lines = text.splitlines()
    for i, line in enumerate(lines):
        if " by " in line and " from " in line:
            head, _, _ = line.partition(" from ")
            # drop all recorded premises
            yield "\n".join(lines[:i] + [head + " from"] + lines[i + 1:])
            # swap in a different rule id
            fact_part, _, tail = line.partition(" by ")
            yield "\n".join(lines[:i] + [fact_part + " by r01 from"]
                            + lines[i + 1:])
        if " by " in line and "input" not in line:
            fact_part, _, _ = line.partition(" by ")
            # claim a derived fact was a construction seed
            yield "\n".join(lines[:i] + [fact_part + " input 0"]
                            + lines[i + 1:])


def test_checker_rejects_mutations(midline_proof, rules):
    prob, dag = midline_proof
    text = serialize_dag(dag)
    rejected = total = 0
    for mutated in _mutations(text):
        try:
            bad = parse_dag(mutated)
        except DagSyntaxError:
            rejected += 1
            total += 1
            continue
        total += 1
        res = check_proof(prob, bad, rules)
        if not res:
            rejected += 1
            assert res.reasons
    assert total > 0 and rejected == total


def test_checker_rejects_wrong_goal(midline_proof, rules):
    prob, dag = midline_proof
    other = parse("free A; free B; free C; midpoint M : A B; "
                  "midpoint N : A C ?- cong A B A C")
    assert not check_proof(other, dag, rules)


def test_minimize_drops_unused_step(rules):
    src = ("free A; free B; free C; midpoint M : A B; midpoint N : A C; "
           "midpoint K : B C ?- para B C M N")
    prob = parse(src)
    d = some_diagram(prob)
    db = saturate_problem(prob, rules, limits=LIMITS, diagram=d)
    mdag = minimize(prob, trace(db, prob.goal), rules)
    assert prob.defining_step["K"] not in mdag.used_constructions
    assert check_proof(prob, mdag, rules)
