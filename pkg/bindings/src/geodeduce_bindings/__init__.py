"""Thin scripting bindings over the geodeduce core.

Every function here marshals and delegates; no wrapper reimplements
engine logic.  Problems cross the boundary as DSL text, facts as
`"pred A B ..."` text or `("pred", "A", "B", ...)` tuples, construction
steps as DSL step lines.  Core objects are held behind opaque handles
that stay valid until :meth:`BoundHandle.release` is called; any
operation on a released handle raises :class:`InvalidHandle` instead of
crashing.  Distinct handles are safe to use from different threads; a
single handle is not re-entrant.
"""

from __future__ import annotations

import os
import threading
from typing import Iterable, Iterator

from geodeduce.checker import check_proof as _check_proof
from geodeduce.diagram import DegeneracyReport, instantiate
from geodeduce.facts import Fact, make_fact, parse_fact
from geodeduce.generator import (DedupStore, GeneratorConfig, format_record,
                                 generate as _generate)
from geodeduce.policy import make_policy
from geodeduce.problem import (Problem, parse as _parse, parse_steps,
                               serialize as _serialize_problem)
from geodeduce.rules import load_rules
from geodeduce.saturate import SaturationLimits, saturate_problem
from geodeduce.search import SearchConfig, solve as _solve
from geodeduce.trace import (minimize as _minimize, parse_dag, serialize_dag,
                             trace as _trace)

__all__ = [
    "BoundHandle", "InvalidHandle",
    "ProblemHandle", "FactDbHandle", "ProofDagHandle", "SearchResultHandle",
    "parse", "saturate", "query", "trace", "solve", "generate", "check_proof",
]


class InvalidHandle(RuntimeError):
    """The handle was released; the underlying object is gone."""


class BoundHandle:
    """Opaque reference to a core-owned object.

    Valid until :meth:`release`; afterwards every access raises
    :class:`InvalidHandle`.  Releasing twice is a no-op.
    """

    __slots__ = ("_obj", "_lock")

    def __init__(self, obj):
        self._obj = obj
        self._lock = threading.Lock()

    def release(self) -> None:
        with self._lock:
            self._obj = None

    @property
    def released(self) -> bool:
        return self._obj is None

    @property
    def _core(self):
        obj = self._obj
        if obj is None:
            raise InvalidHandle(f"{type(self).__name__} has been released")
        return obj


class ProblemHandle(BoundHandle):
    def serialize(self) -> str:
        return _serialize_problem(self._core)

    @property
    def points(self) -> tuple[str, ...]:
        return tuple(self._core.points)

    @property
    def goal(self) -> str:
        return str(self._core.goal)


class FactDbHandle(BoundHandle):
    def facts(self) -> tuple[str, ...]:
        return tuple(str(f) for f in self._core.fact_list)

    @property
    def complete(self) -> bool:
        return self._core.complete


class ProofDagHandle(BoundHandle):
    def serialize(self) -> str:
        return serialize_dag(self._core)


class SearchResultHandle(BoundHandle):
    @property
    def solved(self) -> bool:
        return self._core.solved

    @property
    def status(self) -> str:
        return self._core.status

    @property
    def aux(self) -> tuple[str, ...]:
        return tuple(str(s) for s in self._core.aux)

    def proof(self) -> ProofDagHandle:
        if self._core.proof is None:
            raise InvalidHandle("search did not produce a proof")
        return ProofDagHandle(self._core.proof)

    def serialize(self) -> str:
        """Proof text in the prove-command file format: one `aux` line per
        auxiliary step, then the proof DAG."""
        r = self._core
        if not r.solved:
            raise ValueError(f"not solved: {r.status}")
        text = "".join(f"aux {s}\n" for s in r.aux)
        return text + serialize_dag(r.proof) + "\n"


def _as_fact(fact) -> Fact:
    if isinstance(fact, Fact):
        return fact
    if isinstance(fact, str):
        return parse_fact(fact)
    return make_fact(fact[0], tuple(fact[1:]))


def _rules(rules):
    if rules is None or isinstance(rules, str):
        return load_rules(rules)
    return rules


def parse(text: str, *, allow_undefined_goal_points: bool = False
          ) -> ProblemHandle:
    """Parse DSL text into a problem handle; errors are the core's own."""
    return ProblemHandle(
        _parse(text, allow_undefined_goal_points=allow_undefined_goal_points))


def _diagram(steps, seed: int, tries: int = 10):
    for s in range(seed, seed + tries):
        d = instantiate(steps, seed=s)
        if not isinstance(d, DegeneracyReport):
            return d
    return None


def saturate(problem: ProblemHandle, *, rules=None, timeout: float = 30.0,
             seed: int = 0) -> FactDbHandle:
    """Run the closure on a parsed problem and return the fact database."""
    p = problem._core
    diagram = _diagram(p.context, seed)
    db = saturate_problem(p, _rules(rules),
                          SaturationLimits(timeout=timeout), diagram)
    return FactDbHandle(db)


def query(db: FactDbHandle, fact) -> bool:
    """Membership test; `fact` is text or a (pred, *args) tuple."""
    return db._core.knows(_as_fact(fact))


def trace(db: FactDbHandle, goal, *, minimize_for: ProblemHandle | None = None,
          rules=None) -> ProofDagHandle:
    """Extract a proof DAG for `goal`; optionally minimize it against the
    given problem's construction."""
    dag = _trace(db._core, _as_fact(goal))
    if minimize_for is not None:
        dag = _minimize(minimize_for._core, dag, _rules(rules))
    return ProofDagHandle(dag)


def solve(problem: ProblemHandle, *, policy: str = "none",
          beam_width: int = 8, expand_k: int = 16, max_steps: int = 4,
          threads: int | None = None, timeout: float = 30.0,
          seed: int = 0, rules=None) -> SearchResultHandle:
    """Beam search with auxiliary constructions; keywords mirror the
    prove-command flags."""
    rules = _rules(rules)
    pol = make_policy(policy, timeout=timeout)
    cfg = SearchConfig(
        beam_width=beam_width, expand_k=expand_k, max_steps=max_steps,
        limits=SaturationLimits(timeout=timeout),
        worker_count=threads if threads is not None else (os.cpu_count() or 1),
        seed=seed,
    )
    return SearchResultHandle(_solve(problem._core, rules, pol, cfg))


def generate(*, count: int, points: str = "3:3", depth: int = 6,
             seed: int = 0, store: str | None = None,
             rules=None) -> Iterator[str]:
    """Yield problem records as text; keywords mirror the generate-command
    flags.  With `store`, previously emitted problems are skipped."""
    rules = _rules(rules)
    lo, _, hi = points.partition(":")
    gcfg = GeneratorConfig(n_free=(int(lo), int(hi or lo)), max_depth=depth,
                           seed=seed, dedup_store=None)
    dstore = DedupStore(store)
    known = set(dstore.keys)
    for gp in _generate(gcfg, rules, count=count):
        if gp.canonical_key in known:
            continue
        known.add(gp.canonical_key)
        dstore.add(gp)
        yield format_record(gp)


def check_proof(problem: ProblemHandle, dag, *, aux: Iterable[str] = (),
                rules=None) -> tuple[bool, tuple[str, ...]]:
    """Verify a certificate; `dag` is a handle or serialized text, `aux`
    extra construction-step lines appended to the context."""
    p = problem._core
    if isinstance(dag, str):
        dag = parse_dag(dag)
    elif isinstance(dag, ProofDagHandle):
        dag = dag._core
    aux = tuple(aux)
    if aux:
        defined = {pt for s in p.context for pt in s.outputs}
        steps = parse_steps("\n".join(aux), defined)
        p = Problem(p.context + tuple(steps), p.goal)
    res = _check_proof(p, dag, _rules(rules))
    return bool(res), tuple(res.reasons)
