"""Proof extraction: dependency DAGs over derived facts.

A `ProofDag` is a topologically ordered list of nodes, each either an input
(a construction step's seed fact) or a rule application over earlier nodes.
Serialization is line-oriented; node ids are the 1-based line numbers of the
serialized text (the `goal` header is line 1 and is never referenced).
"""

from __future__ import annotations

from dataclasses import dataclass

from .diagram import DegeneracyReport, instantiate
from .factdb import FactDb, well_formed
from .facts import Fact, make_fact, parse_fact
from .problem import Problem
from .rules import Rule
from .saturate import SaturationLimits, saturate_problem


class GoalNotDerived(Exception):
    pass


class DagSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class ProofNode:
    fact: Fact
    rule_id: str  # "input" for seed facts
    premises: tuple[int, ...]  # indices into ProofDag.nodes
    step_index: int | None = None  # for inputs


@dataclass(frozen=True)
class ProofDag:
    goal: Fact
    nodes: tuple[ProofNode, ...]
    used_constructions: tuple[int, ...]


def _earliest(db: FactDb, f: Fact):
    return min(db.facts[f], key=lambda r: r.iteration)


def _step_closure(steps, leaf_idxs) -> tuple[int, ...]:
    defining = {p: i for i, s in enumerate(steps) for p in s.outputs}
    out: set[int] = set()
    stack = list(leaf_idxs)
    while stack:
        i = stack.pop()
        if i in out:
            continue
        out.add(i)
        for p in steps[i].inputs:
            stack.append(defining[p])
    return tuple(sorted(out))


def trace(db: FactDb, goal: Fact) -> ProofDag:
    """Dependency DAG of `goal` using, per fact, its earliest derivation.

    Class-implied goals are first materialized, which expands
    equivalence-class reasoning into explicit chain records.
    """
    if not db.knows(goal):
        raise GoalNotDerived(str(goal))
    if goal not in db.fact_ids:
        if not well_formed(goal):
            raise GoalNotDerived(f"degenerate goal {goal}")
        db.materialize(goal)

    # ancestor closure over earliest records; record premise ids always
    # reference earlier facts, so fact-id order is a topological order
    needed: set[int] = set()
    stack = [db.fact_ids[goal]]
    while stack:
        fid = stack.pop()
        if fid in needed:
            continue
        needed.add(fid)
        rec = _earliest(db, db.fact_list[fid])
        stack.extend(rec.premise_ids)

    order = sorted(needed)
    pos = {fid: i for i, fid in enumerate(order)}
    nodes: list[ProofNode] = []
    leaf_steps: set[int] = set()
    for fid in order:
        f = db.fact_list[fid]
        rec = _earliest(db, f)
        if rec.rule_id == "input":
            idx = db.inputs[f]
            leaf_steps.add(idx)
            nodes.append(ProofNode(f, "input", (), idx))
        else:
            prems = tuple(pos[p] for p in rec.premise_ids)
            nodes.append(ProofNode(f, rec.rule_id, prems))

    if db.construction is not None:
        used = _step_closure(db.construction, leaf_steps)
    else:
        used = tuple(sorted(leaf_steps))
    return ProofDag(goal, tuple(nodes), used)


def minimize(
    problem: Problem,
    dag: ProofDag,
    rules: list[Rule],
    limits: SaturationLimits | None = None,
    seed: int = 0,
) -> ProofDag:
    """Drop used construction steps that are not needed for the goal.

    A step that is not an ancestor of a goal argument is removed when the
    goal is still derivable from the remaining steps (single-removal
    certificate, applied greedily until fixpoint).  Local minimality only:
    the result may not be a global minimum.
    """
    steps = problem.context
    defining = {p: i for i, s in enumerate(steps) for p in s.outputs}
    protected = set(_step_closure(steps, {defining[p] for p in problem.goal.args}))

    kept = set(dag.used_constructions) | protected
    best = dag
    changed = True
    while changed:
        changed = False
        for cand in sorted(kept - protected, reverse=True):
            # removing a step also removes everything built on top of it
            trial = _without(steps, kept, cand)
            if trial is None:
                continue
            sub_steps, back = trial
            sub = Problem(sub_steps, problem.goal)
            diagram = None
            for s in range(seed, seed + 5):
                d = instantiate(sub.context, seed=s)
                if not isinstance(d, DegeneracyReport):
                    diagram = d
                    break
            if diagram is None:
                # no sound way to evaluate side conditions: keep the step
                continue
            db = saturate_problem(sub, rules, limits, diagram=diagram)
            if not db.knows(sub.goal):
                continue
            sub_dag = trace(db, sub.goal)
            best = ProofDag(
                sub_dag.goal,
                tuple(
                    ProofNode(
                        n.fact, n.rule_id, n.premises,
                        None if n.step_index is None else back[n.step_index],
                    )
                    for n in sub_dag.nodes
                ),
                tuple(sorted(back[i] for i in sub_dag.used_constructions)),
            )
            kept = set(best.used_constructions) | protected
            changed = True
            break
    return best


def _without(steps, kept: set[int], drop: int):
    """The kept steps minus `drop` and its dependents, as a standalone step
    sequence plus a map from new indices back to original ones.  None when
    nothing is left or the drop set swallows a kept goal prerequisite."""
    removed = {drop}
    defined: set[str] = set()
    chosen: list[int] = []
    for i in sorted(kept):
        if i in removed:
            continue
        s = steps[i]
        if any(p not in defined for p in s.inputs):
            removed.add(i)
            continue
        chosen.append(i)
        defined.update(s.outputs)
    if not chosen:
        return None
    back = {new: old for new, old in enumerate(chosen)}
    return tuple(steps[i] for i in chosen), back


# ---------------------------------------------------------------------------
# serialization


def serialize_dag(dag: ProofDag) -> str:
    lines = [f"goal {dag.goal}"]
    base = 2  # node ids are line numbers; the goal header is line 1
    for n in dag.nodes:
        if n.rule_id == "input":
            lines.append(f"fact {n.fact} input {n.step_index}")
        else:
            ids = " ".join(str(p + base) for p in n.premises)
            lines.append(f"fact {n.fact} by {n.rule_id} from {ids}".rstrip())
    lines.append("steps " + " ".join(str(i) for i in dag.used_constructions))
    return "\n".join(lines) + "\n"


def parse_dag(text: str) -> ProofDag:
    lines = [ln for ln in text.splitlines()]
    if not lines or not lines[0].startswith("goal "):
        raise DagSyntaxError("missing 'goal' header")
    goal = parse_fact(lines[0][5:])
    nodes: list[ProofNode] = []
    used: tuple[int, ...] | None = None
    base = 2
    for lineno, ln in enumerate(lines[1:], start=2):
        ln = ln.strip()
        if not ln:
            continue
        if ln.startswith("steps"):
            used = tuple(int(t) for t in ln.split()[1:])
            continue
        if used is not None:
            raise DagSyntaxError(f"line {lineno}: content after 'steps'")
        toks = ln.split()
        if toks[0] != "fact":
            raise DagSyntaxError(f"line {lineno}: expected 'fact'")
        try:
            arity_end = 2 + _arity(toks[1])
            f = make_fact(toks[1], toks[2:arity_end])
            rest = toks[arity_end:]
            if rest[:1] == ["input"]:
                nodes.append(ProofNode(f, "input", (), int(rest[1])))
            elif rest[:1] == ["by"]:
                rule_id = rest[1]
                if len(rest) > 2 and rest[2] != "from":
                    raise DagSyntaxError(f"line {lineno}: expected 'from'")
                prems = tuple(int(t) - base for t in rest[3:])
                if any(p < 0 or p >= len(nodes) for p in prems):
                    raise DagSyntaxError(
                        f"line {lineno}: premise id out of range"
                    )
                nodes.append(ProofNode(f, rule_id, prems))
            else:
                raise DagSyntaxError(f"line {lineno}: expected 'by' or 'input'")
        except (IndexError, ValueError) as e:
            if isinstance(e, DagSyntaxError):
                raise
            raise DagSyntaxError(f"line {lineno}: {e}") from None
    if used is None:
        raise DagSyntaxError("missing 'steps' line")
    return ProofDag(goal, tuple(nodes), used)


def _arity(pred: str) -> int:
    from .facts import PREDICATE_ARITY

    if pred not in PREDICATE_ARITY:
        raise DagSyntaxError(f"unknown predicate {pred!r}")
    return PREDICATE_ARITY[pred]
