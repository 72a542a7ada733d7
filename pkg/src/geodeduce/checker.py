"""Independent proof verifier.

Re-validates a ProofDag against a problem and rulebase without trusting the
engine that produced it: inputs must be construction seed facts, rule nodes
must pattern-match their rule over recorded premises, and equality-chain
nodes are re-derived by a small self-contained closure over their premises.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .actions import step_seed_facts
from .facts import Fact, make_fact, orbit
from .problem import Problem
from .rules import Rule
from .trace import ProofDag

CHAIN_CONCLUSION = {
    "cong_chain": "cong",
    "coll_chain": "coll",
    "cyclic_chain": "cyclic",
    "circle_chain": "circle",
    "para_chain": "para",
    "perp_para": "perp",
    "eqangle_chain": "eqangle",
    "eqratio_chain": "eqratio",
    "simtri_chain": "simtri",
    "contri_chain": "contri",
}


@dataclass
class CheckResult:
    ok: bool
    reasons: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def check_proof(problem: Problem, dag: ProofDag,
                rules: list[Rule]) -> CheckResult:
    reasons: list[str] = []
    rule_map = {r.rule_id: r for r in rules}
    n = len(dag.nodes)

    if dag.goal != problem.goal:
        reasons.append(
            f"certificate goal `{dag.goal}` differs from problem goal "
            f"`{problem.goal}`")
    if not any(node.fact == dag.goal for node in dag.nodes):
        reasons.append("goal fact not present in dag")

    used = set(dag.used_constructions)
    for i in used:
        if not (0 <= i < len(problem.context)):
            reasons.append(f"used step {i} out of range")

    for idx, node in enumerate(dag.nodes):
        where = f"node {idx} ({node.fact})"
        if any(p >= idx or p < 0 for p in node.premises):
            reasons.append(f"{where}: premise id not earlier in dag")
            continue
        prem_facts = [dag.nodes[p].fact for p in node.premises]
        if node.rule_id == "input":
            if node.step_index is None or not (
                0 <= node.step_index < len(problem.context)
            ):
                reasons.append(f"{where}: bad input step index")
                continue
            if node.step_index not in used:
                reasons.append(f"{where}: input step not in used steps")
            seeds = {
                make_fact(f.pred, f.args)
                for f in step_seed_facts(problem.context[node.step_index])
            }
            if node.fact not in seeds:
                reasons.append(f"{where}: not a seed fact of its step")
        elif node.rule_id in CHAIN_CONCLUSION:
            if node.fact.pred != CHAIN_CONCLUSION[node.rule_id]:
                reasons.append(f"{where}: chain kind mismatch")
                continue
            if not _closure_holds(node.fact, prem_facts):
                reasons.append(f"{where}: not implied by premise closure")
        elif node.rule_id in rule_map:
            err = _match_rule_node(rule_map[node.rule_id], node.fact,
                                   prem_facts)
            if err:
                reasons.append(f"{where}: {err}")
        else:
            reasons.append(f"{where}: unknown rule {node.rule_id!r}")

    return CheckResult(not reasons, reasons)


# ---------------------------------------------------------------------------
# rule-node pattern matching


def _literal_tautology(f: Fact) -> bool:
    a = f.args
    if f.pred == "coll":
        return len(set(a)) <= 2
    if f.pred == "cyclic":
        return len(set(a)) <= 3
    if f.pred in ("cong", "para"):
        return frozenset(a[0:2]) == frozenset(a[2:4])
    if f.pred in ("eqangle", "eqratio"):
        return (frozenset(a[0:2]), frozenset(a[2:4])) == (
            frozenset(a[4:6]), frozenset(a[6:8]))
    if f.pred in ("simtri", "contri"):
        return a[:3] == a[3:]
    return False


def _side_satisfiable(kind: str, names: tuple[str, ...]) -> bool:
    # no coordinates at check time: only symbol-level violations are decisive
    if kind == "neq":
        return names[0] != names[1]
    if kind == "ncoll":
        return len(set(names)) == 3
    return frozenset(names[0:2]) != frozenset(names[2:4])


def _match_rule_node(rule: Rule, conclusion: Fact,
                     prem_facts: list[Fact]) -> str | None:
    """None if some binding matches the rule; else a failure reason.

    Recorded premises appear in rule order but may omit instances that are
    degenerate identities (dropped from records); an omitted premise must be
    fully bound and a literal tautology.
    """
    cpred, cvars = rule.conclusion
    if conclusion.pred != cpred:
        return "conclusion predicate mismatch"

    def bind(vars_: tuple, values: tuple, binding: dict) -> dict | None:
        out = binding
        for v, val in zip(vars_, values):
            cur = out.get(v)
            if cur is None:
                if out is binding:
                    out = dict(binding)
                out[v] = val
            elif cur != val:
                return None
        return out

    def premises_ok(pi: int, fi: int, binding: dict) -> dict | None:
        if pi == len(rule.premises):
            return binding if fi == len(prem_facts) else None
        pred, vars_ = rule.premises[pi]
        # consume the next recorded premise
        if fi < len(prem_facts) and prem_facts[fi].pred == pred:
            for variant in set(orbit(pred, prem_facts[fi].args)):
                b = bind(vars_, variant, binding)
                if b is not None:
                    got = premises_ok(pi + 1, fi + 1, b)
                    if got is not None:
                        return got
        # or skip it as an omitted identity
        if all(v in binding for v in vars_):
            inst = make_fact(pred, tuple(binding[v] for v in vars_))
            if _literal_tautology(inst):
                return premises_ok(pi + 1, fi, binding)
        return None

    for cvariant in set(orbit(cpred, conclusion.args)):
        b0 = bind(cvars, cvariant, {})
        if b0 is None:
            continue
        b = premises_ok(0, 0, b0)
        if b is None:
            continue
        if all(v in b for p, vs in rule.premises for v in vs):
            bad = [
                kind for kind, vs in rule.side_conds
                if not _side_satisfiable(kind, tuple(b[v] for v in vs))
            ]
            if bad:
                return f"side condition {bad[0]} violated"
            return None
    return "pattern mismatch"


# ---------------------------------------------------------------------------
# equality-chain closure, independent of the engine's structures


class _UF:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True

    def same(self, a, b) -> bool:
        return self.find(a) == self.find(b)


def _merge_sets(groups: list[set], overlap: int) -> list[set]:
    changed = True
    while changed:
        changed = False
        for i, j in itertools.combinations(range(len(groups)), 2):
            if len(groups[i] & groups[j]) >= overlap:
                groups[i] |= groups[j]
                del groups[j]
                changed = True
                break
    return groups


_RIGHT = "<right-angle>"


class _Closure:
    """Equality closure over a bag of facts: merged lines and circles,
    direction / segment / angle / ratio / triangle classes."""

    def __init__(self, facts: list[Fact]):
        self.lines: list[set] = []
        self.circles: list[tuple[set, set]] = []  # (points, centers)
        self.dirs = _UF()
        self.segs = _UF()
        self.angles = _UF()
        self.ratios = _UF()
        self.tris = {"simtri": _UF(), "contri": _UF()}
        segs_seen: set[frozenset] = set()

        for f in facts:
            a = f.args
            if f.pred == "coll":
                self.lines.append(set(a))
            elif f.pred == "midp":
                self.lines.append(set(a))
            elif f.pred == "cyclic":
                self.circles.append((set(a), set()))
            elif f.pred == "circle":
                self.circles.append((set(a[1:]), {a[0]}))
            for i in range(0, len(a) - 1, 2):
                if f.pred in ("coll", "cyclic", "circle", "midp"):
                    break
                if f.pred in ("simtri", "contri"):
                    break
                segs_seen.add(frozenset(a[i:i + 2]))

        for f in facts:
            a = f.args
            for i in range(0, len(a) - 1, 2):
                if f.pred in ("para", "perp", "eqangle", "cong", "eqratio"):
                    self.lines.append(set(a[i:i + 2]))
        self.lines = _merge_sets(self.lines, 2)
        self.circles = self._merge_circles(self.circles)

        # two segments on one merged line share a direction
        for ln in self.lines:
            pts = sorted(ln)
            first = frozenset(pts[:2])
            for pair in itertools.combinations(pts, 2):
                self.dirs.union(first, frozenset(pair))

        for f in facts:
            a = f.args
            if f.pred == "para":
                self.dirs.union(frozenset(a[0:2]), frozenset(a[2:4]))
        for f in facts:
            a = f.args
            if f.pred == "cong":
                self.segs.union(frozenset(a[0:2]), frozenset(a[2:4]))
            elif f.pred == "midp":
                self.segs.union(frozenset((a[0], a[1])),
                                frozenset((a[0], a[2])))
        for f in facts:
            a = f.args
            if f.pred == "perp":
                k = self._akey(a[0:2], a[2:4])
                self.angles.union(k, _RIGHT)
                self.angles.union(self._akey(a[2:4], a[0:2]), _RIGHT)
            elif f.pred == "eqangle":
                self.angles.union(self._akey(a[0:2], a[2:4]),
                                  self._akey(a[4:6], a[6:8]))
                self.angles.union(self._akey(a[2:4], a[0:2]),
                                  self._akey(a[6:8], a[4:6]))
            elif f.pred == "eqratio":
                self.ratios.union(self._rkey(a[0:2], a[2:4]),
                                  self._rkey(a[4:6], a[6:8]))
                self.ratios.union(self._rkey(a[2:4], a[0:2]),
                                  self._rkey(a[6:8], a[4:6]))
            elif f.pred in ("simtri", "contri"):
                uf = self.tris[f.pred]
                t1, t2 = a[:3], a[3:]
                for i, j, k in itertools.permutations((0, 1, 2)):
                    uf.union((t1[i], t1[j], t1[k]), (t2[i], t2[j], t2[k]))
                if f.pred == "contri":
                    # congruent triangles are similar too
                    uf2 = self.tris["simtri"]
                    for i, j, k in itertools.permutations((0, 1, 2)):
                        uf2.union((t1[i], t1[j], t1[k]),
                                  (t2[i], t2[j], t2[k]))

    def _merge_circles(self, circles):
        changed = True
        while changed:
            changed = False
            for i, j in itertools.combinations(range(len(circles)), 2):
                pi, ci = circles[i]
                pj, cj = circles[j]
                # share three points, or share a center and a point
                if len(pi & pj) >= 3 or (ci & cj and pi & pj):
                    circles[i] = (circles[i][0] | circles[j][0],
                                  circles[i][1] | circles[j][1])
                    del circles[j]
                    changed = True
                    break
        return circles

    def _akey(self, s1, s2):
        return (self.dirs.find(frozenset(s1)), self.dirs.find(frozenset(s2)))

    def _rkey(self, s1, s2):
        return (self.segs.find(frozenset(s1)), self.segs.find(frozenset(s2)))

    def holds(self, f: Fact) -> bool:
        a = f.args
        if f.pred == "coll":
            return any(set(a) <= ln for ln in self.lines)
        if f.pred == "cyclic":
            return any(set(a) <= pts for pts, _ in self.circles)
        if f.pred == "circle":
            return any(
                set(a[1:]) <= pts and a[0] in centers
                for pts, centers in self.circles
            )
        if f.pred == "cong":
            return self.segs.same(frozenset(a[0:2]), frozenset(a[2:4]))
        if f.pred == "para":
            return self.dirs.same(frozenset(a[0:2]), frozenset(a[2:4]))
        if f.pred == "perp":
            return self.angles.same(self._akey(a[0:2], a[2:4]), _RIGHT)
        if f.pred == "eqangle":
            k1, k2 = self._akey(a[0:2], a[2:4]), self._akey(a[4:6], a[6:8])
            return k1 == k2 or self.angles.same(k1, k2)
        if f.pred == "eqratio":
            k1, k2 = self._rkey(a[0:2], a[2:4]), self._rkey(a[4:6], a[6:8])
            return k1 == k2 or self.ratios.same(k1, k2)
        if f.pred in ("simtri", "contri"):
            return a[:3] == a[3:] or self.tris[f.pred].same(a[:3], a[3:])
        return False


def _closure_holds(conclusion: Fact, premises: list[Fact]) -> bool:
    return _Closure(premises).holds(conclusion)
