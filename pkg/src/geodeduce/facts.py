"""Geometric fact atoms and their canonical forms.

A fact is a predicate over an ordered tuple of point names.  Each predicate
carries a symmetry group; facts are always stored as the lexicographically
least member of their symmetry orbit so that fact identity is well defined
and hashable.
"""

from __future__ import annotations

import itertools
from typing import Iterator, NamedTuple

PREDICATE_ARITY = {
    "coll": 3,
    "para": 4,
    "perp": 4,
    "cong": 4,
    "midp": 3,
    "cyclic": 4,
    "circle": 4,
    "eqangle": 8,
    "eqratio": 8,
    "simtri": 6,
    "contri": 6,
}

PREDICATES = tuple(PREDICATE_ARITY)


class Fact(NamedTuple):
    pred: str
    args: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.pred} {' '.join(self.args)}"


class BadFact(ValueError):
    pass


def _perm3(a):
    x, y, z = a
    return [
        (x, y, z), (x, z, y), (y, x, z), (y, z, x), (z, x, y), (z, y, x),
    ]


def _perm_all(a):
    import itertools

    return list(itertools.permutations(a))


def _pair_orbit(a):
    # two point pairs: swap within each pair, swap the pairs
    p, q, r, s = a
    out = []
    for x, y in ((p, q), (q, p)):
        for u, v in ((r, s), (s, r)):
            out.append((x, y, u, v))
            out.append((u, v, x, y))
    return out


def _eqangle_orbit(a):
    # four lines as point pairs: swap endpoints within each line, swap the
    # two line-pairs, and reverse both pairs simultaneously
    l1, l2, l3, l4 = (a[0], a[1]), (a[2], a[3]), (a[4], a[5]), (a[6], a[7])
    out = []
    for b1, b2, b3, b4 in (
        (l1, l2, l3, l4),
        (l3, l4, l1, l2),
        (l2, l1, l4, l3),
        (l4, l3, l2, l1),
    ):
        for c1 in (b1, b1[::-1]):
            for c2 in (b2, b2[::-1]):
                for c3 in (b3, b3[::-1]):
                    for c4 in (b4, b4[::-1]):
                        out.append(c1 + c2 + c3 + c4)
    return out


def _eqratio_orbit(a):
    # four segments: swap endpoints within each, swap the two ratios, and
    # swap numerators with denominators on both sides simultaneously
    s1, s2, s3, s4 = (a[0], a[1]), (a[2], a[3]), (a[4], a[5]), (a[6], a[7])
    out = []
    for b1, b2, b3, b4 in (
        (s1, s2, s3, s4),
        (s3, s4, s1, s2),
        (s2, s1, s4, s3),
        (s4, s3, s2, s1),
    ):
        for c1 in (b1, b1[::-1]):
            for c2 in (b2, b2[::-1]):
                for c3 in (b3, b3[::-1]):
                    for c4 in (b4, b4[::-1]):
                        out.append(c1 + c2 + c3 + c4)
    return out


def _tri_orbit(a):
    # simultaneous permutation of both triangles, and swapping the pair;
    # lengths are unsigned and angles are mod pi, so the correspondence
    # survives reflection as well as rotation
    t1, t2 = a[:3], a[3:]
    out = []
    for i, j, k in itertools.permutations((0, 1, 2)):
        s1 = (t1[i], t1[j], t1[k])
        s2 = (t2[i], t2[j], t2[k])
        out.append(s1 + s2)
        out.append(s2 + s1)
    return out


def orbit(pred: str, args: tuple[str, ...]) -> Iterator[tuple[str, ...]]:
    """All argument orders equivalent to `args` under the predicate symmetry."""
    if pred == "coll":
        return iter(_perm3(args))
    if pred == "cyclic":
        return iter(_perm_all(args))
    if pred in ("para", "perp", "cong"):
        return iter(_pair_orbit(args))
    if pred == "midp":
        m, a, b = args
        return iter([(m, a, b), (m, b, a)])
    if pred == "circle":
        o = args[0]
        return iter([(o,) + p for p in _perm3(args[1:])])
    if pred == "eqangle":
        return iter(_eqangle_orbit(args))
    if pred == "eqratio":
        return iter(_eqratio_orbit(args))
    if pred in ("simtri", "contri"):
        return iter(_tri_orbit(args))
    raise BadFact(f"unknown predicate {pred!r}")


_canon_cache: dict[tuple, Fact] = {}


def make_fact(pred: str, args) -> Fact:
    """Canonicalize and validate a fact."""
    args = tuple(args)
    cached = _canon_cache.get((pred, args))
    if cached is not None:
        return cached
    if pred not in PREDICATE_ARITY:
        raise BadFact(f"unknown predicate {pred!r}")
    if len(args) != PREDICATE_ARITY[pred]:
        raise BadFact(
            f"{pred} expects {PREDICATE_ARITY[pred]} points, got {len(args)}"
        )
    f = Fact(pred, min(orbit(pred, args)))
    if len(_canon_cache) > 1_000_000:
        _canon_cache.clear()
    _canon_cache[(pred, args)] = f
    return f


def canonical_under(pred: str, args, key) -> tuple[str, ...]:
    """Orbit representative minimizing `key` applied pointwise (used by
    problem canonicalization, where `key` maps names to definition order)."""
    return min(orbit(pred, tuple(args)), key=lambda t: tuple(key(p) for p in t))


def parse_fact(text: str) -> Fact:
    parts = text.split()
    if not parts:
        raise BadFact("empty fact")
    return make_fact(parts[0], parts[1:])
