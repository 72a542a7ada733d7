"""Numeric instantiation of construction sequences and numeric fact checks.

This is the soundness oracle for the deduction engine and the filter for
the problem generator.  Coordinates are plain doubles; all tolerances are
normalized by the diagram scale (its diameter).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .actions import ConstructionStep, signature, step_conditions
from .facts import Fact

CONSTRUCTION_TOL = 1e-9
FACT_TOL = 1e-7
DEGENERACY_MARGIN = 1e-7
DEFAULT_MAX_RETRIES = 64

Point = tuple[float, float]


class UnknownPoint(KeyError):
    pass


@dataclass(frozen=True)
class Diagram:
    coords: dict[str, Point]
    construction_hash: str
    seed: int

    def scale(self) -> float:
        # coords are fixed after construction, so the diameter is too
        s = self.__dict__.get("_scale_cache")
        if s is None:
            s = _scale(self.coords.values())
            object.__setattr__(self, "_scale_cache", s)
        return s


@dataclass(frozen=True)
class DegeneracyReport:
    step_index: int
    condition: str
    retries_used: int


class _Degenerate(Exception):
    def __init__(self, condition: str):
        self.condition = condition


def _scale(points) -> float:
    pts = list(points)
    best = 0.0
    for i, p in enumerate(pts):
        for q in pts[i + 1:]:
            best = max(best, math.hypot(p[0] - q[0], p[1] - q[1]))
    return max(best, 1.0)


def _sub(a, b):
    return (a[0] - b[0], a[1] - b[1])


def _add(a, b):
    return (a[0] + b[0], a[1] + b[1])


def _mul(a, k):
    return (a[0] * k, a[1] * k)


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1]


def _cross(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _dist(a, b):
    return math.hypot(a[0] - b[0], a[1] - b[1])


def _rot90(a):
    return (-a[1], a[0])


def _unit(a):
    n = math.hypot(a[0], a[1])
    if n == 0.0:
        raise _Degenerate("zero-length direction")
    return (a[0] / n, a[1] / n)


def _line_inter(a, b, c, d, margin):
    u = _sub(b, a)
    v = _sub(d, c)
    den = _cross(u, v)
    if abs(den) < margin * math.hypot(*u) * math.hypot(*v):
        raise _Degenerate("lines parallel")
    t = _cross(_sub(c, a), v) / den
    return _add(a, _mul(u, t))


def _foot(p, a, b):
    u = _sub(b, a)
    t = _dot(_sub(p, a), u) / _dot(u, u)
    return _add(a, _mul(u, t))


def _circumcenter(a, b, c, margin):
    d = 2.0 * (
        a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1])
    )
    s = _scale([a, b, c])
    if abs(d) < margin * s * s:
        raise _Degenerate("points collinear")
    ux = (
        _dot(a, a) * (b[1] - c[1])
        + _dot(b, b) * (c[1] - a[1])
        + _dot(c, c) * (a[1] - b[1])
    ) / d
    uy = (
        _dot(a, a) * (c[0] - b[0])
        + _dot(b, b) * (a[0] - c[0])
        + _dot(c, c) * (b[0] - a[0])
    ) / d
    return (ux, uy)


def _line_circle(a, b, o, r, hint, margin, scale, nearer):
    u = _unit(_sub(b, a))
    w = _sub(o, a)
    t0 = _dot(w, u)
    d2 = _dot(w, w) - t0 * t0
    disc = r * r - d2
    if disc < (margin * scale) ** 2:
        raise _Degenerate("line misses or is tangent to circle")
    h = math.sqrt(disc)
    p1 = _add(a, _mul(u, t0 - h))
    p2 = _add(a, _mul(u, t0 + h))
    d1, d2h = _dist(p1, hint), _dist(p2, hint)
    if abs(d1 - d2h) < margin * scale:
        raise _Degenerate("hint point ambiguous")
    if (d1 < d2h) == nearer:
        return p1
    return p2


def _circle_circle(o1, r1, o2, r2, hint, margin, scale, nearer):
    d = _dist(o1, o2)
    if d < margin * scale:
        raise _Degenerate("concentric circles")
    # radical-axis offset from o1 along the center line
    x = (d * d + r1 * r1 - r2 * r2) / (2.0 * d)
    disc = r1 * r1 - x * x
    if disc < (margin * scale) ** 2:
        raise _Degenerate("circles do not cross")
    h = math.sqrt(disc)
    u = _unit(_sub(o2, o1))
    n = _rot90(u)
    base = _add(o1, _mul(u, x))
    p1 = _add(base, _mul(n, h))
    p2 = _add(base, _mul(n, -h))
    d1, d2 = _dist(p1, hint), _dist(p2, hint)
    if abs(d1 - d2) < margin * scale:
        raise _Degenerate("hint point ambiguous")
    if (d1 < d2) == nearer:
        return p1
    return p2


def _isogonal(p, a, b, c, margin, scale):
    # barycentric (x:y:z) of P; conjugate is (la^2/x : lb^2/y : lc^2/z)
    la, lb, lc = _dist(b, c), _dist(c, a), _dist(a, b)
    area = _cross(_sub(b, a), _sub(c, a))
    if abs(area) < margin * scale * scale:
        raise _Degenerate("triangle degenerate")
    x = _cross(_sub(c, b), _sub(p, b))  # signed area PBC (up to factor)
    y = _cross(_sub(a, c), _sub(p, c))
    z = _cross(_sub(b, a), _sub(p, a))
    for v, name in ((x, "side BC"), (y, "side CA"), (z, "side AB")):
        if abs(v) < margin * scale * scale:
            raise _Degenerate(f"point on {name}")
    cx, cy, cz = la * la / x, lb * lb / y, lc * lc / z
    s = cx + cy + cz
    if abs(s) < margin:
        raise _Degenerate("point on circumcircle")
    return (
        (cx * a[0] + cy * b[0] + cz * c[0]) / s,
        (cx * a[1] + cy * b[1] + cz * c[1]) / s,
    )


def _angle_dir(a, b):
    return math.atan2(b[1] - a[1], b[0] - a[0]) % math.pi


def _mod_pi_dist(x: float) -> float:
    x = x % math.pi
    return min(x, math.pi - x)


def _check_conditions(step: ConstructionStep, coords, margin, scale) -> None:
    for kind, pts in step_conditions(step):
        check_condition(kind, [coords[p] for p in pts], margin, scale)


def check_condition(kind: str, pts, margin: float, scale: float) -> None:
    """Raise on a violated non-degeneracy condition (used for rule side
    conditions too)."""
    if kind == "neq":
        if _dist(pts[0], pts[1]) < margin * scale:
            raise _Degenerate("coincident points")
    elif kind == "ncoll":
        a, b, c = pts
        if abs(_cross(_sub(b, a), _sub(c, a))) < margin * scale * scale:
            raise _Degenerate("collinear points")
    elif kind == "npara":
        a, b, c, d = pts
        if abs(_cross(_sub(b, a), _sub(d, c))) < margin * scale * scale:
            raise _Degenerate("parallel lines")
    elif kind == "nperp":
        a, b, c, d = pts
        if abs(_dot(_sub(b, a), _sub(d, c))) < margin * scale * scale:
            raise _Degenerate("perpendicular lines")
    else:
        raise ValueError(f"unknown side condition {kind!r}")


def condition_holds(kind: str, pts, margin: float, scale: float) -> bool:
    try:
        check_condition(kind, pts, margin, scale)
    except _Degenerate:
        return False
    return True


def _eval_step(step: ConstructionStep, coords, rng, margin) -> Point:
    ins = [coords[p] for p in step.inputs]
    scale = _scale(coords.values()) if coords else 10.0
    act = step.action
    if act == "free":
        r = 10.0 * math.sqrt(rng.random())
        th = 2.0 * math.pi * rng.random()
        return (r * math.cos(th), r * math.sin(th))
    if act == "on_line":
        a, b = ins
        t = rng.uniform(-1.5, 1.5)
        p = _add(a, _mul(_sub(b, a), t))
        if _dist(p, a) < margin * scale or _dist(p, b) < margin * scale:
            raise _Degenerate("sampled point coincides with endpoint")
        return p
    if act == "on_circle":
        o, t = ins
        r = _dist(o, t)
        th = 2.0 * math.pi * rng.random()
        return (o[0] + r * math.cos(th), o[1] + r * math.sin(th))
    if act == "line_line_inter":
        return _line_inter(*ins, margin)
    if act in ("line_circle_inter", "line_circle_inter_other"):
        a, b, o, t, h = ins
        return _line_circle(
            a, b, o, _dist(o, t), h, margin, scale,
            nearer=(act == "line_circle_inter"),
        )
    if act in ("circle_circle_inter", "circle_circle_inter_other"):
        o1, t1, o2, t2, h = ins
        return _circle_circle(
            o1, _dist(o1, t1), o2, _dist(o2, t2), h, margin, scale,
            nearer=(act == "circle_circle_inter"),
        )
    if act == "midpoint":
        a, b = ins
        return _mul(_add(a, b), 0.5)
    if act == "foot":
        p, a, b = ins
        return _foot(p, a, b)
    if act == "parallel_through":
        p, a, b = ins
        t = rng.uniform(0.5, 1.5) * rng.choice((-1.0, 1.0))
        return _add(p, _mul(_sub(b, a), t))
    if act == "perp_through":
        p, a, b = ins
        t = rng.uniform(0.5, 1.5) * rng.choice((-1.0, 1.0))
        return _add(p, _mul(_rot90(_sub(b, a)), t))
    if act == "angle_bisector_point":
        a, b, c = ins
        return _add(b, _add(_unit(_sub(a, b)), _unit(_sub(c, b))))
    if act == "circumcenter":
        return _circumcenter(*ins, margin)
    if act == "incenter":
        a, b, c = ins
        la, lb, lc = _dist(b, c), _dist(c, a), _dist(a, b)
        s = la + lb + lc
        return (
            (la * a[0] + lb * b[0] + lc * c[0]) / s,
            (la * a[1] + lb * b[1] + lc * c[1]) / s,
        )
    if act == "reflect":
        p, a, b = ins
        f = _foot(p, a, b)
        return _sub(_mul(f, 2.0), p)
    if act == "rotate_half":
        p, m = ins
        return _sub(_mul(m, 2.0), p)
    if act == "isogonal_conjugate":
        p, a, b, c = ins
        return _isogonal(p, a, b, c, margin, scale)
    if act in ("exsim_center", "insim_center"):
        o1, t1, o2, t2 = ins
        r1, r2 = _dist(o1, t1), _dist(o2, t2)
        if act == "exsim_center":
            if abs(r1 - r2) < margin * scale:
                raise _Degenerate("equal radii: external center at infinity")
            k = r2 - r1
            return _mul(_sub(_mul(o1, r2), _mul(o2, r1)), 1.0 / k)
        return _mul(_add(_mul(o1, r2), _mul(o2, r1)), 1.0 / (r1 + r2))
    raise ValueError(f"no evaluator for action {act!r}")


def instantiate(
    steps,
    seed: int = 0,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> Diagram | DegeneracyReport:
    """Realize a construction sequence in coordinates.

    Free and on-object points are resampled on degeneracy, preserving the
    committed prefix; deterministic steps fail immediately when their side
    conditions are violated.  Deterministic given (steps, seed).
    """
    steps = list(steps)
    coords: dict[str, Point] = {}
    retries = 0
    margin = DEGENERACY_MARGIN
    for idx, step in enumerate(steps):
        sig = signature(step.action)
        attempt = 0
        while True:
            rng = random.Random(f"{seed}:{idx}:{attempt}")
            try:
                scale = _scale(coords.values()) if len(coords) > 1 else 10.0
                _check_conditions(step, coords, margin, scale)
                pt = _eval_step(step, coords, rng, margin)
                # a new point falling on an existing one makes symbolically
                # distinct segments numerically degenerate; reject outright
                for name, q in coords.items():
                    if _dist(pt, q) < margin * scale:
                        raise _Degenerate(f"coincides with {name}")
            except _Degenerate as d:
                if sig.random_draws == 0 or retries >= max_retries:
                    return DegeneracyReport(idx, d.condition, retries)
                retries += 1
                attempt += 1
                continue
            break
        coords[step.outputs[0]] = pt
    text = "; ".join(str(s) for s in steps)
    return Diagram(coords, construction_hash=text, seed=seed)


# ---------------------------------------------------------------------------
# fact checking


def check_fact(d: Diagram, f: Fact, tol: float = FACT_TOL) -> bool:
    """True iff the predicate's defining relation holds strictly within
    `tol`, scale-normalized by the diagram diameter."""
    try:
        pts = [d.coords[a] for a in f.args]
    except KeyError as e:
        raise UnknownPoint(*e.args) from None
    return _holds(f.pred, pts, tol, d.scale())


def _holds(pred: str, pts, tol: float, s: float) -> bool:
    if pred == "coll":
        a, b, c = pts
        return abs(_cross(_sub(b, a), _sub(c, a))) < tol * s * s
    if pred == "para":
        a, b, c, d = pts
        return abs(_cross(_sub(b, a), _sub(d, c))) < tol * s * s
    if pred == "perp":
        a, b, c, d = pts
        return abs(_dot(_sub(b, a), _sub(d, c))) < tol * s * s
    if pred == "cong":
        a, b, c, d = pts
        return abs(_dist(a, b) - _dist(c, d)) < tol * s
    if pred == "midp":
        m, a, b = pts
        return (
            abs(_cross(_sub(a, m), _sub(b, m))) < tol * s * s
            and abs(_dist(m, a) - _dist(m, b)) < tol * s
        )
    if pred in ("cyclic", "circle"):
        if pred == "circle":
            o, rest = pts[0], pts[1:]
        else:
            try:
                o = _circumcenter(pts[0], pts[1], pts[2], 0.0)
            except (_Degenerate, ZeroDivisionError):
                return False
            rest = pts
        rads = [_dist(o, p) for p in rest]
        r = sum(rads) / len(rads)
        return all(abs(x - r) < tol * s for x in rads)
    if pred == "eqangle":
        a, b, c, d, e, f2, g, h = pts
        for p, q in ((a, b), (c, d), (e, f2), (g, h)):
            if _dist(p, q) == 0.0:
                return False
        diff = (_angle_dir(c, d) - _angle_dir(a, b)) - (
            _angle_dir(g, h) - _angle_dir(e, f2)
        )
        return _mod_pi_dist(diff) < tol
    if pred == "eqratio":
        a, b, c, d, e, f2, g, h = pts
        return (
            abs(_dist(a, b) * _dist(g, h) - _dist(c, d) * _dist(e, f2))
            < tol * s * s
        )
    if pred in ("simtri", "contri"):
        a, b, c, d, e, f2 = pts
        s1 = (_dist(a, b), _dist(b, c), _dist(c, a))
        s2 = (_dist(d, e), _dist(e, f2), _dist(f2, d))
        if pred == "contri":
            return all(abs(x - y) < tol * s for x, y in zip(s1, s2))
        return (
            abs(s1[0] * s2[1] - s1[1] * s2[0]) < tol * s * s
            and abs(s1[1] * s2[2] - s1[2] * s2[1]) < tol * s * s
            and abs(s1[0] * s2[2] - s1[2] * s2[0]) < tol * s * s
        )
    raise ValueError(f"unknown predicate {pred!r}")


def probe_facts(d: Diagram, candidates, tol: float = FACT_TOL) -> list[Fact]:
    """Order-preserving sublist of candidates passing check_fact."""
    return [f for f in candidates if check_fact(d, f, tol)]


def dump(d: Diagram) -> str:
    """One `NAME<TAB>x<TAB>y` line per point, 17 significant digits."""
    return "\n".join(
        f"{name}\t{x:.17g}\t{y:.17g}" for name, (x, y) in d.coords.items()
    )
