"""Shared fixtures and helpers for the test suite."""
from __future__ import annotations

import glob
import os
import random

import pytest

from geodeduce.actions import CATALOG
from geodeduce.diagram import DegeneracyReport, instantiate
from geodeduce.problem import Problem, parse
from geodeduce.rules import load_rules

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
PROBLEM_DIR = os.path.join(REPO_ROOT, "problems")
NAMES = [chr(ord("A") + i) for i in range(20)]


@pytest.fixture(scope="session")
def rules():
    return load_rules()


def problem_files() -> list[str]:
    return sorted(glob.glob(os.path.join(PROBLEM_DIR, "*.geo")))


def simple_actions(max_in: int | None = None):
    """Deterministic, single-output, non-composite catalog actions."""
    out = [
        a for a in CATALOG.values()
        if a.name != "free" and a.random_draws == 0 and not a.composite
        and a.n_out == 1
    ]
    if max_in is not None:
        out = [a for a in out if a.n_in <= max_in]
    return out


def random_steps(rng: random.Random, n_free: int, depth: int,
                 actions=None) -> list[str]:
    """Random construction fragment: `n_free` free points then `depth`
    constructed points drawn from `actions`."""
    acts = actions if actions is not None else simple_actions()
    lines = [f"free {NAMES[i]}" for i in range(n_free)]
    pts = NAMES[:n_free]
    k = n_free
    for _ in range(depth):
        a = rng.choice(acts)
        if len(pts) < a.n_in:
            continue
        ins = rng.sample(pts, a.n_in)
        lines.append(f"{a.name} {NAMES[k]} : {' '.join(ins)}")
        pts.append(NAMES[k])
        k += 1
    return lines


def random_problem(rng: random.Random, n_free: int, depth: int,
                   actions=None) -> Problem:
    lines = random_steps(rng, n_free, depth, actions)
    # The goal is a placeholder: these problems exercise saturation only.
    return parse("; ".join(lines) + " ?- coll A B C")


def some_diagram(problem: Problem, tries: int = 8):
    for s in range(tries):
        d = instantiate(problem.context, seed=s)
        if not isinstance(d, DegeneracyReport):
            return d
    return None
