"""Forward-chaining saturation.

`saturate` runs semi-naive evaluation: each pass only considers rule
instances supported by a premise whose backing structure (line, circle,
direction class, segment class, angle or ratio class, or explicit fact
list) changed in the previous pass.  `match_rule` is shared with the
brute-force reference closure in `naive.py`, which disables the delta
filter; the two must agree at fixpoint.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from . import actions
from .diagram import DEGENERACY_MARGIN, Diagram, condition_holds
from .factdb import DeductionRecord, FactDb, _seg, well_formed
from .facts import Fact, make_fact, orbit
from .problem import Problem
from .rules import Rule

EXPLICIT_ONLY = ("midp",)


@dataclass(frozen=True)
class SaturationLimits:
    max_facts: int = 200_000
    max_iterations: int = 64
    timeout: float = 30.0


class Derivation(NamedTuple):
    conclusion: Fact
    rule: Rule
    premises: tuple[Fact, ...]


def seed_facts(problem: Problem) -> list[tuple[Fact, int]]:
    """Construction-step seed facts paired with their step index."""
    out = []
    seen = set()
    for idx, step in enumerate(problem.context):
        for f in actions.step_seed_facts(step):
            if f not in seen:
                seen.add(f)
                out.append((f, idx))
    return out


def _try_bind(binding: dict, vars_: tuple, values: tuple) -> dict | None:
    new = None
    for v, val in zip(vars_, values):
        cur = binding.get(v) if new is None else new.get(v)
        if cur is None:
            if new is None:
                new = dict(binding)
            new[v] = val
        elif cur != val:
            return None
    return binding if new is None else new


def _affected_dirs(db: FactDb) -> set[int]:
    out = set(db.dirs.dirty)
    for lid in db.dirty_lines:
        if lid in db._line_pts:
            out.add(db.dirs.find(lid))
    return out


def _pinned_dir(db: FactDb, binding: dict, va: str, vb: str):
    """Direction root forced by a fully bound point pair: an int root, None
    when the pair is not fully bound, or False when no line joins them (the
    premise cannot match)."""
    if va not in binding or vb not in binding:
        return None
    a, b = binding[va], binding[vb]
    if a == b:
        return False
    lid = db.line_of(a, b, create=False)
    if lid is None:
        return False
    return db.dirs.find(lid)


def _pinned_seg(db: FactDb, binding: dict, va: str, vb: str):
    """Segment-class root forced by a fully bound point pair (same
    None/False convention as _pinned_dir)."""
    if va not in binding or vb not in binding:
        return None
    a, b = binding[va], binding[vb]
    if a == b:
        return False
    s = _seg(a, b)
    if s not in db.segs.parent:
        return False
    return db.segs.find(s)


def _enum_premise(db: FactDb, pred: str, vars_: tuple, binding: dict,
                  delta: bool, virtual: bool = False) -> Iterable[dict]:
    """Yield extended bindings for one premise, enumerating implied
    instances from the class structures.  Bound variables prune the
    enumeration before candidate tuples are built."""
    bound_vals = [binding[v] for v in vars_ if v in binding]
    if pred in EXPLICIT_ONLY:
        facts = db.delta_facts[pred] if delta else db.by_pred[pred]
        for f in facts:
            for variant in sorted(set(orbit(pred, f.args))):
                b = _try_bind(binding, vars_, variant)
                if b is not None:
                    yield b
        return

    if pred == "coll":
        roots = sorted(
            r for r in (db.dirty_lines if delta else db.lines(3))
            if r in db._line_pts and len(db._line_pts[r]) >= 3
        )
        for root in roots:
            pts = db.line_points(root)
            if any(v not in pts for v in bound_vals):
                continue
            for combo in itertools.permutations(pts, 3):
                b = _try_bind(binding, vars_, combo)
                if b is not None:
                    yield b
        return

    if pred == "cyclic":
        roots = sorted(
            r for r in (db.dirty_circles if delta else db.circles(4))
            if r in db._circ_pts and len(db._circ_pts[r]) >= 4
        )
        for root in roots:
            pts = db.circle_points(root)
            if any(v not in pts for v in bound_vals):
                continue
            for combo in itertools.permutations(pts, 4):
                b = _try_bind(binding, vars_, combo)
                if b is not None:
                    yield b
        return

    if pred == "circle":
        roots = sorted(
            r for r in (db.dirty_circles if delta else db.circles(3))
            if r in db._circ_pts and len(db._circ_pts[r]) >= 3
        )
        on_circle_vals = [binding[v] for v in vars_[1:] if v in binding]
        for root in roots:
            pts = db.circle_points(root)
            if any(v not in pts for v in on_circle_vals):
                continue
            centers = db.circle_centers(root)
            if vars_[0] in binding:
                centers = [c for c in centers if c == binding[vars_[0]]]
            for center in centers:
                for combo in itertools.permutations(pts, 3):
                    b = _try_bind(binding, vars_, (center,) + combo)
                    if b is not None:
                        yield b
        return

    if pred == "cong":
        if delta:
            roots = sorted(db.segs.dirty, key=sorted)
        else:
            roots = sorted(
                (r for r in db.segs.parent if db.segs.parent[r] == r),
                key=sorted,
            )
        pin1 = _pinned_seg(db, binding, vars_[0], vars_[1])
        pin2 = _pinned_seg(db, binding, vars_[2], vars_[3])
        if pin1 is False or pin2 is False:
            return
        pin = pin1 if pin1 is not None else pin2
        if pin is not None:
            if (pin1 is not None and pin2 is not None and pin1 != pin2):
                return
            roots = [r for r in roots if r == pin] if delta else [pin]
        b1 = {binding[v] for v in vars_[0:2] if v in binding}
        b2 = {binding[v] for v in vars_[2:4] if v in binding}
        for root in roots:
            mem = sorted(db.segs.members[root], key=sorted)
            if len(mem) < 2:
                continue
            mem1 = [s for s in mem if b1 <= s]
            mem2 = [s for s in mem if b2 <= s]
            for s1 in mem1:
                for s2 in mem2:
                    if s1 == s2:
                        continue
                    for p1 in itertools.permutations(sorted(s1)):
                        for p2 in itertools.permutations(sorted(s2)):
                            b = _try_bind(binding, vars_, p1 + p2)
                            if b is not None:
                                yield b
        return

    if pred == "para":
        droots = sorted(_affected_dirs(db)) if delta else sorted(db._dir_lines)
        pin1 = _pinned_dir(db, binding, vars_[0], vars_[1])
        pin2 = _pinned_dir(db, binding, vars_[2], vars_[3])
        if pin1 is False or pin2 is False:
            return
        if pin1 is not None and pin2 is not None and pin1 != pin2:
            return
        pin = pin1 if pin1 is not None else pin2
        if pin is not None:
            droots = [r for r in droots if r == pin]
        b1 = {binding[v] for v in vars_[0:2] if v in binding}
        b2 = {binding[v] for v in vars_[2:4] if v in binding}
        for droot in droots:
            entries = _dir_entries(db, droot)
            e1 = [(l, p) for l, p in entries if b1 <= set(p)]
            e2 = [(l, p) for l, p in entries if b2 <= set(p)]
            # same-line pairs stay enumerable: two distinct parallel lines can
            # later merge into one, and instances found before the merge must
            # still be found at fixpoint
            for l1, p1 in e1:
                for l2, p2 in e2:
                    b = _try_bind(binding, vars_, p1 + p2)
                    if b is not None:
                        yield b
        return

    if pred == "perp":
        keys = db.right_keys()
        if delta:
            touched = _affected_dirs(db)
            right_dirty = db.angles.find(db.RIGHT) in db.angles.dirty
            if not right_dirty:
                keys = [k for k in keys if k[0] in touched or k[1] in touched]
        pin1 = _pinned_dir(db, binding, vars_[0], vars_[1])
        pin2 = _pinned_dir(db, binding, vars_[2], vars_[3])
        if pin1 is False or pin2 is False:
            return
        for d1, d2 in keys:
            if pin1 is not None and d1 != pin1:
                continue
            if pin2 is not None and d2 != pin2:
                continue
            for _, p1 in _dir_entries(db, d1):
                b1 = _try_bind(binding, vars_[0:2], p1)
                if b1 is None:
                    continue
                for _, p2 in _dir_entries(db, d2):
                    b = _try_bind(b1, vars_[2:4], p2)
                    if b is not None:
                        yield b
        return

    if pred == "eqangle":
        if delta:
            roots = set(db.angles.dirty)
            for d in _affected_dirs(db):
                for aid in db._dir_angles.get(d, ()):
                    roots.add(db.angles.find(aid))
            roots = sorted(roots)
        else:
            roots = sorted(
                a for a in db.angles.parent if db.angles.parent[a] == a
            )
        pins = tuple(
            _pinned_dir(db, binding, vars_[i], vars_[i + 1])
            for i in (0, 2, 4, 6)
        )
        if False in pins:
            return
        pinned_dirs = [q for q in pins if q is not None]
        if pinned_dirs:
            # only classes holding an angle through a pinned direction
            cand = {
                db.angles.find(aid)
                for aid in db._dir_angles.get(pinned_dirs[0], ())
            }
            roots = [r for r in roots if r in cand]
        for root in roots:
            keys = sorted(
                {
                    (db.dirs.find(k[0]), db.dirs.find(k[1]))
                    for k in (
                        db._angle_of[aid]
                        for aid in db.angles.members[root]
                        if aid != db.RIGHT
                    )
                }
            )
            # include (k, k): a pair of keys equalized by a later direction
            # merge must stay enumerable, or the fixpoint depends on
            # derivation order
            for k1, k2 in itertools.product(keys, repeat=2):
                if pins[0] is not None and k1[0] != pins[0]:
                    continue
                if pins[1] is not None and k1[1] != pins[1]:
                    continue
                if pins[2] is not None and k2[0] != pins[2]:
                    continue
                if pins[3] is not None and k2[1] != pins[3]:
                    continue
                for _, s1 in _dir_entries(db, k1[0]):
                    b1 = _try_bind(binding, vars_[0:2], s1)
                    if b1 is None:
                        continue
                    for _, s2 in _dir_entries(db, k1[1]):
                        b2 = _try_bind(b1, vars_[2:4], s2)
                        if b2 is None:
                            continue
                        for _, s3 in _dir_entries(db, k2[0]):
                            b3 = _try_bind(b2, vars_[4:6], s3)
                            if b3 is None:
                                continue
                            for _, s4 in _dir_entries(db, k2[1]):
                                b4 = _try_bind(b3, vars_[6:8], s4)
                                if b4 is not None:
                                    yield b4
        if virtual:
            # a direction merge can make a same-key instance true without
            # any angle class recording the key (equal keys are known as a
            # tautology), so enumerate (k, k) pairs built from the merged
            # directions directly
            aff = sorted(_affected_dirs(db))
            if aff:
                aff_set = set(aff)
                all_dirs = db._entry_cache.get("all_dirs")
                if all_dirs is None:
                    all_dirs = sorted(
                        r for r in db._dir_lines if db.dirs.find(r) == r
                    )
                    db._entry_cache["all_dirs"] = all_dirs

                def slot(bnd, droot, lo):
                    p = bnd.get(vars_[lo])
                    if p is not None:
                        return _dir_entries_at(db, droot, p)
                    return _dir_entries(db, droot)

                for x in aff:
                    for y in all_dirs:
                        if x == y or (y in aff_set and y < x):
                            continue
                        for key in ((x, y), (y, x)):
                            if pins[0] is not None and key[0] != pins[0]:
                                continue
                            if pins[1] is not None and key[1] != pins[1]:
                                continue
                            if pins[2] is not None and key[0] != pins[2]:
                                continue
                            if pins[3] is not None and key[1] != pins[3]:
                                continue
                            for _, s1 in slot(binding, key[0], 0):
                                b1 = _try_bind(binding, vars_[0:2], s1)
                                if b1 is None:
                                    continue
                                for _, s2 in slot(b1, key[1], 2):
                                    b2 = _try_bind(b1, vars_[2:4], s2)
                                    if b2 is None:
                                        continue
                                    for _, s3 in slot(b2, key[0], 4):
                                        b3 = _try_bind(b2, vars_[4:6], s3)
                                        if b3 is None:
                                            continue
                                        for _, s4 in slot(b3, key[1], 6):
                                            b4 = _try_bind(b3, vars_[6:8], s4)
                                            if b4 is not None:
                                                yield b4
        return

    if pred == "eqratio":
        if delta:
            roots = set(db.ratios.dirty)
            for sroot in db.segs.dirty:
                for rid in db._segroot_ratios.get(sroot, ()):
                    roots.add(db.ratios.find(rid))
            roots = sorted(roots)
        else:
            roots = sorted(
                r for r in db.ratios.parent if db.ratios.parent[r] == r
            )
        pins = tuple(
            _pinned_seg(db, binding, vars_[i], vars_[i + 1])
            for i in (0, 2, 4, 6)
        )
        if False in pins:
            return
        pinned_segs = [q for q in pins if q is not None]
        if pinned_segs:
            cand = {
                db.ratios.find(rid)
                for rid in db._segroot_ratios.get(pinned_segs[0], ())
            }
            roots = [r for r in roots if r in cand]
        for root in roots:
            keys = []
            for rid in db.ratios.members[root]:
                s1, s2 = db._ratio_of[rid]
                keys.append((db.segs.find(s1), db.segs.find(s2)))
            keys = sorted(set(keys), key=lambda k: (sorted(k[0]), sorted(k[1])))
            # (k, k) pairs included for the same confluence reason as eqangle
            for k1, k2 in itertools.product(keys, repeat=2):
                if pins[0] is not None and k1[0] != pins[0]:
                    continue
                if pins[1] is not None and k1[1] != pins[1]:
                    continue
                if pins[2] is not None and k2[0] != pins[2]:
                    continue
                if pins[3] is not None and k2[1] != pins[3]:
                    continue
                for s1 in _seg_entries(db, k1[0]):
                    b1 = _try_bind(binding, vars_[0:2], s1)
                    if b1 is None:
                        continue
                    for s2 in _seg_entries(db, k1[1]):
                        b2 = _try_bind(b1, vars_[2:4], s2)
                        if b2 is None:
                            continue
                        for s3 in _seg_entries(db, k2[0]):
                            b3 = _try_bind(b2, vars_[4:6], s3)
                            if b3 is None:
                                continue
                            for s4 in _seg_entries(db, k2[1]):
                                b4 = _try_bind(b3, vars_[6:8], s4)
                                if b4 is not None:
                                    yield b4
        return

    if pred in ("simtri", "contri"):
        uf = db.simtris if pred == "simtri" else db.contris
        roots = sorted(uf.dirty) if delta else sorted(
            {uf.find(x) for x in uf.parent}
        )
        b1 = {binding[v] for v in vars_[0:3] if v in binding}
        b2 = {binding[v] for v in vars_[3:6] if v in binding}
        for root in roots:
            mem = sorted(uf.members[root])
            m1 = [t for t in mem if b1 <= set(t)]
            m2 = [t for t in mem if b2 <= set(t)]
            for t1 in m1:
                for t2 in m2:
                    if t1 == t2:
                        continue
                    b = _try_bind(binding, vars_, t1 + t2)
                    if b is not None:
                        yield b
        return

    raise ValueError(f"cannot enumerate premise predicate {pred}")


def _dir_entries(db: FactDb, droot: int) -> list[tuple[int, tuple]]:
    """(line root, ordered point pair) choices for a direction class.
    Cached per matching phase; the cache is cleared before each pass."""
    cached = db._entry_cache.get(("dir", droot))
    if cached is not None:
        return cached
    out = []
    for lr in sorted(db._dir_lines.get(droot, ())):
        pts = db._line_pts.get(lr)
        if pts is None:
            continue
        for p, q in itertools.permutations(pts, 2):
            out.append((lr, (p, q)))
    db._entry_cache[("dir", droot)] = out
    return out


def _dir_entries_at(db: FactDb, droot: int, p) -> list[tuple[int, tuple]]:
    """Entries of a direction class whose ordered pair starts at `p`."""
    cached = db._entry_cache.get(("dirat", droot))
    if cached is None:
        cached = {}
        for lr, pair in _dir_entries(db, droot):
            cached.setdefault(pair[0], []).append((lr, pair))
        db._entry_cache[("dirat", droot)] = cached
    return cached.get(p, ())


def _seg_entries(db: FactDb, segroot: frozenset) -> list[tuple]:
    cached = db._entry_cache.get(("seg", segroot))
    if cached is not None:
        return cached
    out = []
    for s in sorted(db.segs.members[segroot], key=sorted):
        a, b = sorted(s)
        out.append((a, b))
        out.append((b, a))
    db._entry_cache[("seg", segroot)] = out
    return out


def _order_premises(rule: Rule, first: int) -> list[int]:
    order = [first]
    bound: set[str] = set(rule.premises[first][1])
    rest = [i for i in range(len(rule.premises)) if i != first]
    while rest:
        best = max(
            rest,
            key=lambda i: (
                sum(1 for v in rule.premises[i][1] if v in bound),
                -i,
            ),
        )
        order.append(best)
        bound.update(rule.premises[best][1])
        rest.remove(best)
    return order


def _side_ok(kind: str, names: tuple, diagram: Diagram | None) -> bool:
    if kind == "neq":
        return names[0] != names[1]
    if diagram is None:
        # without coordinates only symbol-level distinctness is checkable
        if kind == "ncoll":
            return len(set(names)) == 3
        return frozenset(names[0:2]) != frozenset(names[2:4])
    # side conditions are pure functions of the fixed coordinates
    cache = diagram.__dict__.get("_cond_cache")
    if cache is None:
        cache = {}
        object.__setattr__(diagram, "_cond_cache", cache)
    key = (kind, names)
    hit = cache.get(key)
    if hit is None:
        hit = condition_holds(
            kind,
            [diagram.coords[n] for n in names],
            DEGENERACY_MARGIN,
            diagram.scale(),
        )
        cache[key] = hit
    return hit


def match_rule(db: FactDb, rule: Rule, delta: bool,
               diagram: Diagram | None = None) -> list[Derivation]:
    """All instances of `rule` derivable from the database whose conclusion
    is not already known.  With `delta=True`, only instances supported by a
    structure dirtied since the last `clear_dirty`."""
    results: list[Derivation] = []
    seen: set[tuple] = set()
    n = len(rule.premises)
    eq_first = next(
        (i for i, (p, _) in enumerate(rule.premises) if p == "eqangle"), None)
    for first in range(n):
        order = _order_premises(rule, first)

        def extend(pos: int, binding: dict):
            if pos == len(order):
                _emit(db, rule, binding, diagram, seen, results)
                return
            idx = order[pos]
            pred, vars_ = rule.premises[idx]
            if all(v in binding for v in vars_):
                f = make_fact(pred, tuple(binding[v] for v in vars_))
                if db.knows(f):
                    extend(pos + 1, binding)
                return
            use_delta = delta and pos == 0
            # same-key eqangle instances are known as tautologies without
            # any class recording the key, so the delta index can miss
            # them; enumerate those virtually, once per rule invocation
            use_virtual = use_delta and idx == eq_first
            for b in _enum_premise(db, pred, vars_, binding, use_delta,
                                   use_virtual):
                extend(pos + 1, b)

        extend(0, {})
    return results


def _emit(db: FactDb, rule: Rule, binding: dict, diagram: Diagram | None,
          seen: set, results: list[Derivation]) -> None:
    for kind, vs in rule.side_conds:
        if not _side_ok(kind, tuple(binding[v] for v in vs), diagram):
            return
    pred, vars_ = rule.conclusion
    conc = make_fact(pred, tuple(binding[v] for v in vars_))
    if not well_formed(conc) or db.knows(conc):
        return
    prems = tuple(
        make_fact(p, tuple(binding[v] for v in vs)) for p, vs in rule.premises
    )
    key = (rule.rule_id, conc, prems)
    if key not in seen:
        seen.add(key)
        results.append(Derivation(conc, rule, prems))


class LimitStop(Exception):
    def __init__(self, which: str):
        self.which = which


def saturate(
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
    iteration = 0
    try:
        while True:
            iteration += 1
            if iteration > limits.max_iterations:
                raise LimitStop("max_iterations")
            db.iteration = iteration
            db._entry_cache.clear()
            derivations: list[Derivation] = []
            for rule in rules:
                if time.monotonic() > deadline:
                    raise LimitStop("timeout")
                derivations.extend(match_rule(db, rule, delta=True,
                                              diagram=diagram))
            db.clear_dirty()
            added = 0
            for conc, rule, prems in derivations:
                if db.knows(conc):
                    continue
                # well-formed tautological premises (e.g. an angle equality
                # whose keys collapsed) still expand to alignment chains;
                # only degenerate identities are dropped from the record
                pids = tuple(
                    db.materialize(p) for p in prems if well_formed(p)
                )
                db.add_fact(conc, DeductionRecord(rule.rule_id, pids, iteration))
                added += 1
                if len(db.fact_list) >= limits.max_facts:
                    raise LimitStop("max_facts")
            db.stats["facts_per_iteration"].append(added)
            if added == 0:
                break
    except LimitStop as stop:
        db.complete = False
        db.limit_hit = stop.which
    db.stats["iterations"] = iteration
    return db


def saturate_problem(
    problem: Problem,
    rules: list[Rule],
    limits: SaturationLimits | None = None,
    diagram: Diagram | None = None,
) -> FactDb:
    db = saturate(
        seed_facts(problem), rules, limits, diagram, points=problem.points
    )
    db.construction = problem.context
    return db
