"""Beam search over auxiliary constructions.

Each beam extends the construction sequence with one policy proposal,
saturates the extension, and survivors are chosen by cumulative negative
log likelihood; a solved extension short-circuits the search.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .actions import ConstructionStep
from .checker import check_proof
from .diagram import DegeneracyReport, Diagram, instantiate
from .policy import PolicyContext, Proposal, score_path
from .problem import Problem, canonical_steps
from .rules import Rule
from .saturate import SaturationLimits, saturate_problem
from .trace import ProofDag, minimize, trace


@dataclass
class SearchConfig:
    beam_width: int = 8
    expand_k: int = 16
    max_steps: int = 4
    limits: SaturationLimits = field(default_factory=SaturationLimits)
    worker_count: int = 1
    seed: int = 0


@dataclass
class BeamNode:
    problem: Problem  # context + aux so far, with the original goal
    aux: tuple[ConstructionStep, ...]
    proposals: tuple[Proposal, ...]
    cum_nll: float = 0.0
    db: object | None = None  # FactDb once saturated; None = no valid diagram
    solved: bool = False

    @property
    def complete(self) -> bool:
        return self.db is not None and getattr(self.db, "complete", True)


@dataclass
class DepthRecord:
    depth: int
    expanded: int
    solved: bool
    best_nll: float
    wall_ms: float

    def line(self) -> str:
        return (
            f"depth {self.depth} expanded {self.expanded} "
            f"solved {int(self.solved)} best_nll {self.best_nll:.4f} "
            f"wall_ms {self.wall_ms:.1f}"
        )


@dataclass
class Telemetry:
    records: list[DepthRecord] = field(default_factory=list)
    nodes_expanded: int = 0
    saturations: int = 0
    wall_ms: float = 0.0
    peak_concurrency: int = 0

    def lines(self) -> list[str]:
        return [r.line() for r in self.records]


@dataclass
class SearchResult:
    status: str  # solved | exhausted | budget_exceeded
    aux: tuple[ConstructionStep, ...] = ()
    proof: ProofDag | None = None
    telemetry: Telemetry = field(default_factory=Telemetry)

    @property
    def solved(self) -> bool:
        return self.status == "solved"


def _diagram(steps, seed: int, tries: int = 10) -> Diagram | None:
    for s in range(seed, seed + tries):
        d = instantiate(steps, seed=s)
        if not isinstance(d, DegeneracyReport):
            return d
    return None


def _canonical_key(problem: Problem) -> str:
    """Dedup key: canonical construction text plus the goal under the same
    renaming (names the construction never defines pass through as-is)."""
    steps, renaming = canonical_steps(problem.context)
    text = "; ".join(str(s) for s in steps)
    goal = problem.goal
    args = " ".join(renaming.get(a, a) for a in goal.args)
    return f"{text} ?- {goal.pred} {args}"


def run_parallel(nodes: list[BeamNode], rules: list[Rule], cfg: SearchConfig,
                 telemetry: Telemetry | None = None) -> list[BeamNode]:
    """Saturate pending nodes with at most worker_count concurrent jobs;
    results are identical to sequential execution."""
    pending = [n for n in nodes if n.db is None and not n.solved]
    if not pending:
        return nodes
    gauge = {"now": 0, "peak": 0}
    lock = threading.Lock()

    def job(node: BeamNode) -> None:
        with lock:
            gauge["now"] += 1
            gauge["peak"] = max(gauge["peak"], gauge["now"])
        try:
            d = _diagram(node.problem.context, cfg.seed)
            if d is None:
                return  # no non-degenerate instantiation: leave unsaturated
            node.db = saturate_problem(node.problem, rules,
                                       limits=cfg.limits, diagram=d)
            goal = node.problem.goal
            defined = {p for s in node.problem.context for p in s.outputs}
            node.solved = set(goal.args) <= defined and node.db.knows(goal)
        finally:
            with lock:
                gauge["now"] -= 1

    with ThreadPoolExecutor(max_workers=cfg.worker_count) as pool:
        list(pool.map(job, pending))
    if telemetry is not None:
        telemetry.saturations += len(pending)
        telemetry.peak_concurrency = max(telemetry.peak_concurrency,
                                         gauge["peak"])
    return nodes


def _finish(node: BeamNode, rules: list[Rule],
            cfg: SearchConfig, telemetry: Telemetry) -> SearchResult:
    goal = node.problem.goal
    dag = trace(node.db, goal)
    dag = minimize(node.problem, dag, rules, limits=cfg.limits, seed=cfg.seed)
    result = check_proof(node.problem, dag, rules)
    if not result:
        raise AssertionError(
            "search produced a proof the checker rejects: "
            + "; ".join(result.reasons)
        )
    return SearchResult("solved", node.aux, dag, telemetry)


def _extensions(node: BeamNode, proposals: list[Proposal],
                goal_args: tuple[str, ...]) -> list[tuple[Proposal, BeamNode]]:
    """Candidate children: each proposal as-is, plus variants renaming its
    output to each goal name the construction does not yet define."""
    base = node.problem.context
    defined = {p for s in base for p in s.outputs}
    unbound = [a for a in dict.fromkeys(goal_args) if a not in defined]
    out = []
    for prop in proposals:
        variants = [prop.step]
        if len(prop.step.outputs) == 1:
            for u in unbound:
                variants.append(prop.step._replace(outputs=(u,)))
        for step in variants:
            if any(o in defined for o in step.outputs):
                continue
            child = BeamNode(
                problem=Problem(base + (step,), node.problem.goal),
                aux=node.aux + (step,),
                proposals=node.proposals + (prop,),
                cum_nll=score_path(list(node.proposals) + [prop]),
            )
            out.append((prop, child))
    return out


def solve(problem: Problem, rules: list[Rule], policy=None,
          cfg: SearchConfig | None = None) -> SearchResult:
    cfg = cfg or SearchConfig()
    telemetry = Telemetry()
    t0 = time.monotonic()
    try:
        return _solve(problem, rules, policy, cfg, telemetry)
    finally:
        telemetry.wall_ms = (time.monotonic() - t0) * 1000


def _solve(problem: Problem, rules: list[Rule], policy,
           cfg: SearchConfig, telemetry: Telemetry) -> SearchResult:
    base_text = "; ".join(str(s) for s in problem.context)
    goal = problem.goal

    root = BeamNode(problem=problem, aux=(), proposals=())
    t0 = time.monotonic()
    run_parallel([root], rules, cfg, telemetry)
    telemetry.records.append(DepthRecord(
        0, 1, root.solved, 0.0, (time.monotonic() - t0) * 1000))
    telemetry.nodes_expanded += 1
    if root.solved:
        return _finish(root, rules, cfg, telemetry)
    if policy is None:
        return SearchResult("exhausted", telemetry=telemetry)

    frontier = [root]
    seen = {_canonical_key(problem)}
    for depth in range(1, cfg.max_steps + 1):
        t0 = time.monotonic()
        candidates: list[BeamNode] = []
        for node in frontier:
            ctx = PolicyContext(base_text, node.aux, cfg.expand_k)
            for _, child in _extensions(node, policy.propose(ctx), goal.args):
                key = _canonical_key(child.problem)
                if key in seen:
                    continue
                seen.add(key)
                candidates.append(child)
        run_parallel(candidates, rules, cfg, telemetry)
        telemetry.nodes_expanded += len(candidates)

        solved = [n for n in candidates if n.solved]
        record = DepthRecord(
            depth, len(candidates), bool(solved),
            min((n.cum_nll for n in candidates), default=float("inf")),
            (time.monotonic() - t0) * 1000,
        )
        telemetry.records.append(record)
        if solved:
            best = min(
                solved,
                key=lambda n: (n.cum_nll, _canonical_key(n.problem)),
            )
            return _finish(best, rules, cfg, telemetry)
        if not candidates:
            return SearchResult("exhausted", telemetry=telemetry)
        # survivors: lowest cumulative NLL over the whole current frontier,
        # ties broken by canonical serialization
        frontier = sorted(
            frontier + candidates,
            key=lambda n: (n.cum_nll, _canonical_key(n.problem)),
        )[: cfg.beam_width]
    return SearchResult("budget_exceeded", telemetry=telemetry)
