"""Brute-force reference closure.

Each pass enumerates every implied fact in the database, then matches every
rule by nested-loop joins over those lists — premises in written order, all
argument orders via the predicate symmetry orbit, no delta restriction, no
indexes.  Deliberately independent of the production matcher's enumeration
so it can serve as a correctness oracle, and deliberately naive so it can
serve as the benchmark baseline; the two engines must reach identical
fixpoints.
"""

from __future__ import annotations

import time
from collections import defaultdict
from typing import Iterable

from .diagram import Diagram
from .factdb import DeductionRecord, FactDb, well_formed
from .facts import Fact, make_fact, orbit
from .problem import Problem
from .rules import Rule
from .saturate import SaturationLimits, _side_ok, _try_bind, seed_facts


def _match_rule_bruteforce(db: FactDb, rule: Rule,
                           by_pred: dict[str, list[Fact]],
                           diagram: Diagram | None) -> list[tuple]:
    results: list[tuple] = []
    seen: set[tuple] = set()
    n = len(rule.premises)

    def emit(binding: dict) -> None:
        for kind, vs in rule.side_conds:
            if not _side_ok(kind, tuple(binding[v] for v in vs), diagram):
                return
        pred, vars_ = rule.conclusion
        conc = make_fact(pred, tuple(binding[v] for v in vars_))
        if not well_formed(conc) or db.knows(conc):
            return
        prems = tuple(
            make_fact(p, tuple(binding[v] for v in vs))
            for p, vs in rule.premises
        )
        key = (conc, prems)
        if key not in seen:
            seen.add(key)
            results.append((conc, rule, prems))

    def extend(pos: int, binding: dict) -> None:
        if pos == n:
            emit(binding)
            return
        pred, vars_ = rule.premises[pos]
        if all(v in binding for v in vars_):
            # a fully determined premise may hold as a class tautology that
            # the fact enumeration does not list
            if db.knows(make_fact(pred, tuple(binding[v] for v in vars_))):
                extend(pos + 1, binding)
            return
        for f in by_pred.get(pred, ()):
            for variant in set(orbit(pred, f.args)):
                b = _try_bind(binding, vars_, variant)
                if b is not None:
                    extend(pos + 1, b)

    extend(0, {})
    return results


def saturate_naive(
    seeds: Iterable[tuple[Fact, int]],
    rules: list[Rule],
    limits: SaturationLimits | None = None,
    diagram: Diagram | None = None,
    points: Iterable[str] = (),
) -> FactDb:
    limits = limits or SaturationLimits()
    deadline = time.monotonic() + limits.timeout
    db = FactDb()
    db.register_points(points)
    for f, idx in seeds:
        db.add_fact(f, DeductionRecord("input", (), 0), step_index=idx)
    db.clear_dirty()
    iteration = 0
    while True:
        iteration += 1
        if iteration > limits.max_iterations:
            db.complete = False
            db.limit_hit = "max_iterations"
            break
        db.iteration = iteration
        db._entry_cache.clear()
        by_pred: dict[str, list[Fact]] = defaultdict(list)
        for f in db.all_facts(include_tautologies=True):
            by_pred[f.pred].append(f)
        derivations = []
        for rule in rules:
            if time.monotonic() > deadline:
                db.complete = False
                db.limit_hit = "timeout"
                db.stats["iterations"] = iteration
                return db
            derivations.extend(
                _match_rule_bruteforce(db, rule, by_pred, diagram)
            )
        added = 0
        for conc, rule, prems in derivations:
            if db.knows(conc):
                continue
            pids = tuple(db.materialize(p) for p in prems if well_formed(p))
            db.add_fact(conc, DeductionRecord(rule.rule_id, pids, iteration))
            added += 1
            if len(db.fact_list) >= limits.max_facts:
                db.complete = False
                db.limit_hit = "max_facts"
                db.stats["iterations"] = iteration
                return db
        db.clear_dirty()
        db.stats["facts_per_iteration"].append(added)
        if added == 0:
            break
    db.stats["iterations"] = iteration
    return db


def saturate_problem_naive(
    problem: Problem,
    rules: list[Rule],
    limits: SaturationLimits | None = None,
    diagram: Diagram | None = None,
) -> FactDb:
    db = saturate_naive(
        seed_facts(problem), rules, limits, diagram, points=problem.points
    )
    db.construction = problem.context
    return db
