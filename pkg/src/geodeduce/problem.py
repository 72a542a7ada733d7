"""Problems: construction sequences with a goal fact.

Concrete syntax:  `step (";" step)* "?-" goal` where a step is
`ACTION OUT1 [OUT2] ":" IN1 IN2 ...` (the colon may be omitted; arities
disambiguate), newlines also separate steps, and `#` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property

from . import actions
from .actions import ConstructionStep, signature, validate_step
from .facts import PREDICATE_ARITY, Fact, canonical_under, make_fact

NAME_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DslSyntaxError(ParseError):
    pass


class UndefinedPoint(ParseError):
    pass


class RedefinedPoint(ParseError):
    pass


@dataclass(frozen=True)
class Problem:
    context: tuple[ConstructionStep, ...]
    goal: Fact

    @cached_property
    def points(self) -> tuple[str, ...]:
        return tuple(p for step in self.context for p in step.outputs)

    @cached_property
    def defining_step(self) -> dict[str, int]:
        return {
            p: i for i, step in enumerate(self.context) for p in step.outputs
        }

    def step_ancestors(self, idx: int) -> set[int]:
        """`idx` plus every step it transitively depends on."""
        out: set[int] = set()
        stack = [idx]
        while stack:
            i = stack.pop()
            if i in out:
                continue
            out.add(i)
            for p in self.context[i].inputs:
                stack.append(self.defining_step[p])
        return out


def serialize(p: Problem) -> str:
    steps = "; ".join(str(s) for s in p.context)
    return f"{steps} ?- {p.goal}"


def _split_step(tokens: list[str], line: int) -> ConstructionStep:
    action = tokens[0]
    rest = tokens[1:]
    sig = signature(action)  # raises UnknownAction
    if ":" in rest:
        cut = rest.index(":")
        outs, ins = rest[:cut], rest[cut + 1:]
        if ":" in ins:
            raise DslSyntaxError("multiple ':' in step", line)
    else:
        outs, ins = rest[: sig.n_out], rest[sig.n_out:]
    for name in outs + ins:
        if not NAME_RE.match(name):
            raise DslSyntaxError(f"bad point name {name!r}", line)
    return ConstructionStep(action, tuple(ins), tuple(outs))


def parse_steps(
    text: str, defined: set[str] | None = None
) -> tuple[ConstructionStep, ...]:
    """Parse a goal-free construction sequence (`;`/newline separated)."""
    defined = set() if defined is None else set(defined)
    steps: list[ConstructionStep] = []
    for lineno, raw in enumerate(text.splitlines() or [""], start=1):
        body = raw.split("#", 1)[0]
        for frag in body.split(";"):
            frag = frag.strip()
            if frag.startswith("!"):
                frag = frag[1:].strip()
            if frag:
                steps.append(_parse_step(frag, lineno, defined))
    return tuple(steps)


def parse(text: str, allow_undefined_goal_points: bool = False) -> Problem:
    """Parse and validate a problem. A `! ` line prefix (auxiliary marker in
    generated records) is accepted and ignored."""
    # strip comments, track line numbers per fragment
    fragments: list[tuple[str, int]] = []
    for lineno, raw in enumerate(text.splitlines() or [""], start=1):
        body = raw.split("#", 1)[0]
        for frag in body.split(";"):
            frag = frag.strip()
            if frag.startswith("!"):
                frag = frag[1:].strip()
            if frag:
                fragments.append((frag, lineno))

    steps: list[ConstructionStep] = []
    goal: Fact | None = None
    defined: set[str] = set()
    pending_goal_parts: list[str] | None = None
    goal_line = 0
    for frag, lineno in fragments:
        if goal is not None or pending_goal_parts is not None:
            raise DslSyntaxError("content after goal", lineno)
        if "?-" in frag:
            step_part, goal_part = frag.split("?-", 1)
            step_part = step_part.strip()
            goal_part = goal_part.strip()
            if step_part:
                fragments_here = [(step_part, lineno)]
            else:
                fragments_here = []
            for sp, ln in fragments_here:
                steps.append(_parse_step(sp, ln, defined))
            if not goal_part:
                raise DslSyntaxError("empty goal", lineno)
            pending_goal_parts = goal_part.split()
            goal_line = lineno
            continue
        steps.append(_parse_step(frag, lineno, defined))

    if pending_goal_parts is None:
        raise DslSyntaxError("missing '?-' goal", len(text.splitlines()) or 1)
    pred = pending_goal_parts[0]
    if pred not in PREDICATE_ARITY:
        raise DslSyntaxError(f"unknown predicate {pred!r}", goal_line)
    args = pending_goal_parts[1:]
    if len(args) != PREDICATE_ARITY[pred]:
        raise DslSyntaxError(
            f"{pred} expects {PREDICATE_ARITY[pred]} points", goal_line
        )
    if not allow_undefined_goal_points:
        for a in args:
            if a not in defined:
                raise UndefinedPoint(a, goal_line)
    goal = make_fact(pred, args)
    return Problem(tuple(steps), goal)


def _parse_step(frag: str, lineno: int, defined: set[str]) -> ConstructionStep:
    tokens = frag.split()
    if not tokens:
        raise DslSyntaxError("empty step", lineno)
    step = _split_step(tokens, lineno)
    try:
        validate_step(step, defined)
    except actions.UnknownAction:
        raise
    except actions.ArityMismatch:
        raise
    except actions.StepError as e:
        msg = str(e)
        if "undefined" in msg:
            raise UndefinedPoint(msg, lineno) from None
        raise RedefinedPoint(msg, lineno) from None
    defined.update(step.outputs)
    return step


# ---------------------------------------------------------------------------
# canonical form


@dataclass(frozen=True)
class CanonicalProblem:
    canonical_text: str
    renaming: dict[str, str]

    @property
    def as_problem(self) -> Problem:
        return parse(self.canonical_text)


def _canonical_names(n: int) -> list[str]:
    alpha = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    return [
        alpha[i] if i < 26 else f"{alpha[i % 26]}{i // 26}" for i in range(n)
    ]


def canonical_steps(steps) -> tuple[list[ConstructionStep], dict[str, str]]:
    """Steps with symmetric inputs ordered by definition index and points
    renamed by first appearance. Invariant under point renaming."""
    def_order: dict[str, int] = {}
    for step in steps:
        for p in step.outputs:
            def_order[p] = len(def_order)
    key = def_order.__getitem__
    names = _canonical_names(len(def_order))
    renaming = {p: names[i] for p, i in def_order.items()}
    out = []
    for step in steps:
        ins = actions.canonical_inputs(step, key)
        out.append(
            ConstructionStep(
                step.action,
                tuple(renaming[p] for p in ins),
                tuple(renaming[p] for p in step.outputs),
            )
        )
    return out, renaming


def canonical_steps_text(steps) -> str:
    out, _ = canonical_steps(steps)
    return "; ".join(str(s) for s in out)


def canonicalize(p: Problem) -> CanonicalProblem:
    def_order = {q: i for i, q in enumerate(p.points)}
    steps, renaming = canonical_steps(p.context)
    goal_args = canonical_under(p.goal.pred, p.goal.args, def_order.__getitem__)
    goal = make_fact(p.goal.pred, tuple(renaming[a] for a in goal_args))
    text = f"{'; '.join(str(s) for s in steps)} ?- {goal}"
    return CanonicalProblem(text, renaming)


# ---------------------------------------------------------------------------
# composite expansion


def _fresh(base: str, taken: set[str]) -> str:
    i = 1
    while f"{base}_x{i}" in taken:
        i += 1
    name = f"{base}_x{i}"
    taken.add(name)
    return name


def _expand_step(step: ConstructionStep, taken: set[str]) -> list[ConstructionStep]:
    S = ConstructionStep
    if step.action == "isogonal_conjugate":
        p, a, b, c = step.inputs
        (q,) = step.outputs
        h1 = _fresh(q, taken)
        r1 = _fresh(q, taken)
        h2 = _fresh(q, taken)
        r2 = _fresh(q, taken)
        return [
            S("angle_bisector_point", (b, a, c), (h1,)),
            S("reflect", (p, a, h1), (r1,)),
            S("angle_bisector_point", (a, b, c), (h2,)),
            S("reflect", (p, b, h2), (r2,)),
            S("line_line_inter", (a, r1, b, r2), (q,)),
        ]
    if step.action in ("exsim_center", "insim_center"):
        o1, t1, o2, t2 = step.inputs
        (e,) = step.outputs
        u1 = _fresh(e, taken)
        s1 = _fresh(e, taken)
        u2 = _fresh(e, taken)
        s2 = _fresh(e, taken)
        lci2 = (
            "line_circle_inter"
            if step.action == "exsim_center"
            else "line_circle_inter_other"
        )
        return [
            S("perp_through", (o1, o1, o2), (u1,)),
            S("line_circle_inter", (o1, u1, o1, t1, u1), (s1,)),
            S("perp_through", (o2, o1, o2), (u2,)),
            S(lci2, (o2, u2, o2, t2, u2), (s2,)),
            S("line_line_inter", (s1, s2, o1, o2), (e,)),
        ]
    raise ValueError(f"not a composite action: {step.action}")


def expand_composites(p: Problem) -> Problem:
    """Replace composite steps by primitive sequences with hidden
    intermediate points; composite outputs keep their names and positions."""
    taken = set(p.points)
    steps: list[ConstructionStep] = []
    for step in p.context:
        if signature(step.action).composite:
            steps.extend(_expand_step(step, taken))
        else:
            steps.append(step)
    return Problem(tuple(steps), p.goal)
