"""Deduction rule parsing.

Rule syntax, one rule per line::

    ID : premise ("," premise)* "=>" conclusion ["|" side ( ";" side)*]

where premises/conclusions are predicates applied to point variables and
sides are non-degeneracy guards (neq, ncoll, npara, nperp).
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass

from .facts import PREDICATE_ARITY

SIDE_KINDS = {"neq": 2, "ncoll": 3, "npara": 4, "nperp": 4}


class RuleSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class Rule:
    rule_id: str
    premises: tuple[tuple[str, tuple[str, ...]], ...]
    conclusion: tuple[str, tuple[str, ...]]
    side_conds: tuple[tuple[str, tuple[str, ...]], ...] = ()

    @property
    def variables(self) -> set[str]:
        out = set()
        for _, vs in self.premises:
            out.update(vs)
        return out


def _parse_atom(text: str, arities: dict, what: str):
    toks = text.split()
    if not toks:
        raise RuleSyntaxError(f"empty {what}")
    pred, args = toks[0], tuple(toks[1:])
    if pred not in arities:
        raise RuleSyntaxError(f"unknown {what} predicate {pred!r}")
    if len(args) != arities[pred]:
        raise RuleSyntaxError(
            f"{pred} expects {arities[pred]} arguments, got {len(args)}"
        )
    return pred, args


def parse_rule(line: str) -> Rule:
    head, _, rest = line.partition(":")
    rule_id = head.strip()
    if not rule_id or not rest.strip():
        raise RuleSyntaxError(f"malformed rule: {line!r}")
    body, _, sides = rest.partition("|")
    lhs, arrow, rhs = body.partition("=>")
    if not arrow:
        raise RuleSyntaxError(f"rule {rule_id}: missing '=>'")
    premises = tuple(
        _parse_atom(p, PREDICATE_ARITY, "premise") for p in lhs.split(",")
    )
    conclusion = _parse_atom(rhs.strip(), PREDICATE_ARITY, "conclusion")
    side_conds = tuple(
        _parse_atom(s, SIDE_KINDS, "side condition")
        for s in sides.split(";")
        if s.strip()
    )
    bound = set()
    for _, vs in premises:
        bound.update(vs)
    free = set(conclusion[1]) - bound
    if free:
        raise RuleSyntaxError(
            f"rule {rule_id}: unbound conclusion variables {sorted(free)}"
        )
    for _, vs in side_conds:
        if set(vs) - bound:
            raise RuleSyntaxError(f"rule {rule_id}: unbound side variables")
    return Rule(rule_id, premises, conclusion, side_conds)


def parse_rulebase(text: str) -> list[Rule]:
    rules = []
    seen = set()
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        rule = parse_rule(line)
        if rule.rule_id in seen:
            raise RuleSyntaxError(f"duplicate rule id {rule.rule_id}")
        seen.add(rule.rule_id)
        rules.append(rule)
    return rules


def load_rules(path: str | None = None) -> list[Rule]:
    if path is None:
        text = (
            importlib.resources.files("geodeduce").joinpath("rules.txt").read_text()
        )
    else:
        with open(path) as fh:
            text = fh.read()
    return parse_rulebase(text)
