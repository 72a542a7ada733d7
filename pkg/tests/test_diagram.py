"""Numeric diagram instantiation and fact checking."""
import random

import pytest
from hypothesis import given, settings, strategies as st

from geodeduce.actions import step_seed_facts
from geodeduce.diagram import (DegeneracyReport, check_fact, instantiate,
                               probe_facts)
from geodeduce.facts import make_fact
from geodeduce.problem import parse, parse_steps

from conftest import random_problem, simple_actions, some_diagram


def test_instantiate_deterministic():
    steps = parse_steps("free A; free B; free C; circumcenter O : A B C")
    d1 = instantiate(steps, seed=3)
    d2 = instantiate(steps, seed=3)
    assert d1.coords == d2.coords


def test_instantiate_seed_varies():
    steps = parse_steps("free A; free B")
    d1 = instantiate(steps, seed=1)
    d2 = instantiate(steps, seed=2)
    assert d1.coords != d2.coords


def test_seeded_facts_hold_numerically():
    src = ("free A; free B; free C; midpoint M : A B; foot F : A B C; "
           "circumcenter O : A B C; parallel_through P : C A B")
    steps = parse_steps(src)
    d = instantiate(steps, seed=5)
    assert not isinstance(d, DegeneracyReport)
    for step in steps:
        for f in step_seed_facts(step):
            assert check_fact(d, f), (step, f)


def test_false_fact_rejected():
    steps = parse_steps("free A; free B; free C")
    d = instantiate(steps, seed=0)
    assert not check_fact(d, make_fact("coll", ("A", "B", "C")))
    assert not check_fact(d, make_fact("cong", ("A", "B", "A", "C")))


def test_degenerate_intersection_reported():
    # two lines through C and B, both parallel to AB: they never meet
    src = ("free A; free B; free C; parallel_through P : C A B; "
           "parallel_through Q : B A B; line_line_inter X : C P B Q")
    steps = parse_steps(src)
    for seed in range(5):
        d = instantiate(steps, seed=seed)
        assert isinstance(d, DegeneracyReport)


def test_degeneracy_report_names_condition():
    steps = parse_steps("free A; free B; line_line_inter X : A B A B")
    d = instantiate(steps, seed=0)
    assert isinstance(d, DegeneracyReport)
    assert d.condition


def test_probe_facts_filters():
    steps = parse_steps("free A; free B; midpoint M : A B")
    d = instantiate(steps, seed=1)
    cands = [make_fact("coll", ("A", "M", "B")),
             make_fact("cong", ("M", "A", "M", "B")),
             make_fact("cong", ("A", "B", "A", "M"))]
    assert probe_facts(d, cands) == cands[:2]


def test_tolerance_scale_invariance():
    # the same construction at a different scale passes the same checks
    steps = parse_steps("free A; free B; free C; midpoint M : B C")
    d = instantiate(steps, seed=2)
    big = type(d)({k: (x * 1e6, y * 1e6) for k, (x, y) in d.coords.items()},
                  d.construction_hash, d.seed)
    f = make_fact("midp", ("M", "B", "C"))
    assert check_fact(d, f) and check_fact(big, f)


@given(st.integers(0, 10**6))
@settings(max_examples=40, deadline=None)
def test_random_constructions_seed_facts_sound(seed):
    rng = random.Random(seed)
    prob = random_problem(rng, rng.randint(3, 5), rng.randint(1, 3),
                          actions=simple_actions(max_in=4))
    d = some_diagram(prob)
    if d is None:
        return
    for step in prob.context:
        for f in step_seed_facts(step):
            assert check_fact(d, f), (step, f)
