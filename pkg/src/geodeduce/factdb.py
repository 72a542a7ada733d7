"""The saturated fact database.

Explicitly derived facts carry deduction records; equality-flavored
knowledge (collinearity, concyclicity, congruence, equal angles, equal
ratios, parallelism) is absorbed into merged line/circle objects and
union-find classes so transitive consequences are implied rather than
materialized.  Transitivity chains are reconstructed only when a proof
needs them (`expand_implied`).
"""

from __future__ import annotations

import itertools
from collections import defaultdict, deque
from typing import Iterable, NamedTuple

from .facts import Fact, make_fact


class DeductionRecord(NamedTuple):
    rule_id: str
    premise_ids: tuple[int, ...]
    iteration: int


class UnknownPoint(KeyError):
    pass


# structural rule ids used for reconstructed equivalence-class chains
STRUCTURAL_RULES = (
    "cong_chain",
    "coll_chain",
    "cyclic_chain",
    "circle_chain",
    "para_chain",
    "perp_para",
    "eqangle_chain",
    "eqratio_chain",
    "simtri_chain",
    "contri_chain",
)

_RENORM = "<renorm>"


class ProofUF:
    """Union-find with an explanation forest: every union stores its cause
    on an edge between the two *original* elements, so a chain of causes can
    be recovered for any implied equality."""

    def __init__(self):
        self.parent: dict = {}
        self.members: dict = {}
        self.adj: dict = defaultdict(list)
        self.dirty: set = set()

    def add(self, x):
        if x not in self.parent:
            self.parent[x] = x
            self.members[x] = [x]
        return self.find(x)

    def __contains__(self, x):
        return x in self.parent

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x, y, cause) -> bool:
        self.add(x)
        self.add(y)
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        if len(self.members[rx]) < len(self.members[ry]):
            rx, ry = ry, rx
        self.parent[ry] = rx
        self.members[rx].extend(self.members.pop(ry))
        self.adj[x].append((y, cause))
        self.adj[y].append((x, cause))
        self.dirty.add(rx)
        self.dirty.discard(ry)
        return True

    def same(self, x, y) -> bool:
        return x in self.parent and y in self.parent and self.find(x) == self.find(y)

    def class_members(self, x) -> list:
        return self.members[self.find(x)]

    def explain(self, x, y) -> list[tuple]:
        """Edges (a, b, cause) along the forest path from x to y."""
        if x == y:
            return []
        prev = {x: None}
        queue = deque([x])
        while queue:
            cur = queue.popleft()
            if cur == y:
                break
            for nxt, cause in self.adj.get(cur, ()):
                if nxt not in prev:
                    prev[nxt] = (cur, cause)
                    queue.append(nxt)
        if y not in prev:
            raise KeyError("elements not connected")
        path = []
        cur = y
        while prev[cur] is not None:
            par, cause = prev[cur]
            path.append((par, cur, cause))
            cur = par
        path.reverse()
        return path


def _seg(a: str, b: str) -> frozenset:
    return frozenset((a, b))


def well_formed(f: Fact) -> bool:
    """Reject concrete facts degenerate at the symbol level (zero-length
    segments, repeated collinear points, ...)."""
    a = f.args
    p = f.pred
    if p in ("coll", "midp"):
        return len(set(a)) == 3
    if p == "cyclic":
        return len(set(a)) == 4
    if p == "circle":
        return len(set(a)) == 4
    if p in ("para", "perp", "cong"):
        return a[0] != a[1] and a[2] != a[3]
    if p in ("eqangle", "eqratio"):
        return all(a[i] != a[i + 1] for i in (0, 2, 4, 6))
    if p in ("simtri", "contri"):
        return len(set(a[:3])) == 3 and len(set(a[3:])) == 3
    return True


class FactDb:
    def __init__(self):
        self.points: set[str] = set()
        self.facts: dict[Fact, list[DeductionRecord]] = {}
        self.fact_list: list[Fact] = []
        self.fact_ids: dict[Fact, int] = {}
        self.by_pred: dict[str, list[Fact]] = defaultdict(list)
        self.inputs: dict[Fact, int] = {}  # seed fact -> construction step
        # the construction the seeds came from, when saturated via a Problem
        self.construction: tuple | None = None
        self.delta_facts: dict[str, list[Fact]] = defaultdict(list)

        # lines: integer ids; the parent map makes merged lines aliases
        self._line_parent: dict[int, int] = {}
        self._line_pts: dict[int, tuple] = {}  # root -> sorted tuple
        self._pair_line: dict[frozenset, int] = {}
        self._pt_lines: dict[str, set[int]] = defaultdict(set)
        self._line_causes: dict[int, list[Fact]] = defaultdict(list)
        self._next_line = 0
        self.dirty_lines: set[int] = set()

        # directions: equivalence over line ids (coll merges + para facts)
        self.dirs = ProofUF()
        self._dir_lines: dict[int, set[int]] = {}  # dir root -> live line roots


        # circles
        self._circ_parent: dict[int, int] = {}
        self._circ_pts: dict[int, tuple] = {}
        self._circ_centers: dict[int, list[tuple[str, Fact]]] = defaultdict(list)
        self._triple_circ: dict[frozenset, int] = {}
        self._circ_causes: dict[int, list[Fact]] = defaultdict(list)
        self._next_circ = 0
        self.dirty_circles: set[int] = set()

        # congruent segment classes
        self.segs = ProofUF()

        # equal directed-angle classes over ordered direction pairs; the
        # reserved element RIGHT anchors every perpendicular pair, making
        # "all right angles are equal" (and its converse) structural
        self._angle_key: dict[tuple, int] = {}  # normalized key -> element id
        self._angle_of: dict[int, tuple] = {}  # element id -> creation key
        self._angle_rep: dict[int, tuple] = {}  # element id -> (seg, seg) reps
        self._dir_angles: dict[int, set[int]] = defaultdict(set)
        self.angles = ProofUF()
        self.RIGHT = -1
        self.angles.add(self.RIGHT)
        self._next_angle = 0

        # directed triangle similarity / congruence over ordered triples
        self.simtris = ProofUF()
        self.contris = ProofUF()

        # equal ratio classes over ordered segment-class pairs
        self._ratio_key: dict[tuple, int] = {}
        self._ratio_of: dict[int, tuple] = {}
        self._ratio_rep: dict[int, tuple] = {}
        self._segroot_ratios: dict[frozenset, set[int]] = defaultdict(set)
        self.ratios = ProofUF()
        self._next_ratio = 0

        self._entry_cache: dict = {}
        self.iteration = 0
        self.complete = True
        self.limit_hit: str | None = None
        self.stats: dict = {"iterations": 0, "facts_per_iteration": []}

    # -- lines --------------------------------------------------------------

    def line_find(self, lid: int) -> int:
        root = lid
        while self._line_parent[root] != root:
            root = self._line_parent[root]
        while self._line_parent[lid] != root:
            self._line_parent[lid], lid = root, self._line_parent[lid]
        return root

    def line_of(self, a: str, b: str, create: bool = True) -> int | None:
        key = _seg(a, b)
        lid = self._pair_line.get(key)
        if lid is not None:
            return self.line_find(lid)
        if not create:
            return None
        lid = self._next_line
        self._next_line += 1
        self._line_parent[lid] = lid
        self._line_pts[lid] = tuple(sorted((a, b)))
        self._pair_line[key] = lid
        self._pt_lines[a].add(lid)
        self._pt_lines[b].add(lid)
        self.dirs.add(lid)
        self._dir_lines[self.dirs.find(lid)] = {lid}
        return lid

    def line_points(self, root: int) -> tuple:
        return self._line_pts[root]

    def lines(self, min_pts: int = 3) -> list[int]:
        return [
            r
            for r in self._line_pts
            if self._line_parent[r] == r and len(self._line_pts[r]) >= min_pts
        ]

    def _merge_dirs(self, la: int, lb: int, cause) -> None:
        ra, rb = self.dirs.find(la), self.dirs.find(lb)
        if ra == rb:
            return
        lines = self._dir_lines.pop(ra, set()) | self._dir_lines.pop(rb, set())
        self.dirs.union(la, lb, cause)
        root = self.dirs.find(la)
        self._dir_lines[root] = lines
        # re-normalize angle keys and perp pairs naming the dead root
        dead = rb if root == ra else ra
        for aid in sorted(self._dir_angles.pop(dead, set())):
            self._dir_angles[root].add(aid)
            self._rehome_angle(aid)

    def _rehome_angle(self, aid: int) -> None:
        d1, d2 = self._angle_of[aid]
        key = (self.dirs.find(d1), self.dirs.find(d2))
        other = self._angle_key.get(key)
        if other is None:
            self._angle_key[key] = aid
            return
        if self.angles.find(other) != self.angles.find(aid):
            self.angles.union(aid, other, _RENORM)
            m1 = self._angle_for((key[1], key[0]), self._angle_rep[aid][::-1])
            m2 = self._angle_for((key[1], key[0]), self._angle_rep[other][::-1])
            self.angles.union(m1, m2, _RENORM)

    def _merge_lines(self, la: int, lb: int, cause: Fact) -> int:
        """Merge line classes rooted at la, lb; cascades when the merged
        point set makes other pairs collide."""
        la, lb = self.line_find(la), self.line_find(lb)
        if la == lb:
            return la
        if len(self._line_pts[la]) < len(self._line_pts[lb]):
            la, lb = lb, la
        self._line_parent[lb] = la
        pts = sorted(set(self._line_pts[la]) | set(self._line_pts[lb]))
        old_pts = set(self._line_pts[la])
        self._line_pts[la] = tuple(pts)
        del self._line_pts[lb]
        self._line_causes[la].extend(self._line_causes.pop(lb, ()))
        if cause is not None and cause not in self._line_causes[la]:
            self._line_causes[la].append(cause)
        self._merge_dirs(la, lb, cause)
        self.dirty_lines.add(la)
        self.dirty_lines.discard(lb)
        cascades = []
        for p in pts:
            self._pt_lines[p].discard(lb)
            self._pt_lines[p].add(la)
        for p, q in itertools.combinations(pts, 2):
            key = _seg(p, q)
            other = self._pair_line.get(key)
            if other is None:
                self._pair_line[key] = la
            else:
                other = self.line_find(other)
                if other != la:
                    cascades.append(other)
                self._pair_line[key] = la
        for other in cascades:
            if self.line_find(other) != self.line_find(la):
                la = self._merge_lines(la, other, cause)
        return self.line_find(la)

    def _add_coll(self, args: tuple, cause: Fact) -> None:
        pts = sorted(set(args))
        base = self.line_of(pts[0], pts[1])
        for p in pts[2:]:
            other = self.line_of(pts[0], p)
            base = self._merge_lines(base, other, cause)
        root = self.line_find(base)
        assert set(pts) <= set(self._line_pts[root])
        if cause not in self._line_causes[root]:
            self._line_causes[root].append(cause)
        self.dirty_lines.add(root)

    # -- circles ------------------------------------------------------------

    def circ_find(self, cid: int) -> int:
        root = cid
        while self._circ_parent[root] != root:
            root = self._circ_parent[root]
        while self._circ_parent[cid] != root:
            self._circ_parent[cid], cid = root, self._circ_parent[cid]
        return root

    def circles(self, min_pts: int = 3) -> list[int]:
        return [
            r
            for r in self._circ_pts
            if self._circ_parent[r] == r and len(self._circ_pts[r]) >= min_pts
        ]

    def circle_points(self, root: int) -> tuple:
        return self._circ_pts[root]

    def circle_centers(self, root: int) -> list[str]:
        seen = []
        for name, _ in self._circ_centers.get(root, ()):
            if name not in seen:
                seen.append(name)
        return seen

    def circle_through(self, a: str, b: str, c: str) -> int | None:
        cid = self._triple_circ.get(frozenset((a, b, c)))
        return None if cid is None else self.circ_find(cid)

    def _add_circle_pts(self, pts: Iterable[str], cause: Fact,
                        center: str | None = None) -> None:
        pts = sorted(set(pts))
        roots = set()
        for triple in itertools.combinations(pts, 3):
            cid = self._triple_circ.get(frozenset(triple))
            if cid is not None:
                roots.add(self.circ_find(cid))
        if not roots:
            cid = self._next_circ
            self._next_circ += 1
            self._circ_parent[cid] = cid
            self._circ_pts[cid] = ()
            root = cid
        else:
            roots = sorted(roots)
            root = roots[0]
            for other in roots[1:]:
                root = self._merge_circles(root, other, cause)
        root = self.circ_find(root)
        self._circ_pts[root] = tuple(sorted(set(self._circ_pts[root]) | set(pts)))
        if cause not in self._circ_causes[root]:
            self._circ_causes[root].append(cause)
        if center is not None:
            self._circ_centers[root].append((center, cause))
        while True:
            root = self.circ_find(root)
            # circles sharing a center and a point have equal radii, hence
            # coincide
            names = {n for n, _ in self._circ_centers.get(root, ())}
            rpts = set(self._circ_pts[root])
            other = next(
                (r for r in list(self._circ_pts)
                 if r != root and self._circ_parent[r] == r
                 and names & {n for n, _ in self._circ_centers.get(r, ())}
                 and rpts & set(self._circ_pts[r])),
                None,
            )
            if other is not None:
                root = self._merge_circles(root, other, cause)
                continue
            merged_again = False
            for triple in itertools.combinations(self._circ_pts[root], 3):
                key = frozenset(triple)
                other = self._triple_circ.get(key)
                if other is not None and self.circ_find(other) != root:
                    root = self._merge_circles(
                        root, self.circ_find(other), cause
                    )
                    root = self.circ_find(root)
                    merged_again = True
                    break
                self._triple_circ[key] = root
            if not merged_again:
                break
        self.dirty_circles.add(root)

    def _merge_circles(self, ca: int, cb: int, cause: Fact) -> int:
        ca, cb = self.circ_find(ca), self.circ_find(cb)
        if ca == cb:
            return ca
        if len(self._circ_pts[ca]) < len(self._circ_pts[cb]):
            ca, cb = cb, ca
        self._circ_parent[cb] = ca
        self._circ_pts[ca] = tuple(
            sorted(set(self._circ_pts[ca]) | set(self._circ_pts[cb]))
        )
        del self._circ_pts[cb]
        self._circ_causes[ca].extend(self._circ_causes.pop(cb, ()))
        self._circ_centers[ca].extend(self._circ_centers.pop(cb, ()))
        self.dirty_circles.add(ca)
        self.dirty_circles.discard(cb)
        return ca

    # -- angle / ratio keys ---------------------------------------------------

    def _angle_for(self, key: tuple, rep: tuple) -> int:
        aid = self._angle_key.get(key)
        if aid is not None:
            return aid
        aid = self._next_angle
        self._next_angle += 1
        self._angle_key[key] = aid
        self._angle_of[aid] = key
        self._angle_rep[aid] = rep
        self.angles.add(aid)
        self._dir_angles[key[0]].add(aid)
        self._dir_angles[key[1]].add(aid)
        return aid

    def angle_key(self, a, b, c, d, create=True):
        la = self.line_of(a, b, create=create)
        lb = self.line_of(c, d, create=create)
        if la is None or lb is None:
            return None
        return (self.dirs.find(la), self.dirs.find(lb))

    def _ratio_for(self, key: tuple, rep: tuple) -> int:
        rid = self._ratio_key.get(key)
        if rid is not None:
            return rid
        rid = self._next_ratio
        self._next_ratio += 1
        self._ratio_key[key] = rid
        self._ratio_of[rid] = key
        self._ratio_rep[rid] = rep
        self.ratios.add(rid)
        self._segroot_ratios[key[0]].add(rid)
        self._segroot_ratios[key[1]].add(rid)
        return rid

    def ratio_key(self, a, b, c, d, create=True):
        s1, s2 = _seg(a, b), _seg(c, d)
        if create:
            self.segs.add(s1)
            self.segs.add(s2)
        elif s1 not in self.segs or s2 not in self.segs:
            return None
        return (self.segs.find(s1), self.segs.find(s2))

    def _rehome_ratio(self, rid: int) -> None:
        s1, s2 = self._ratio_of[rid]
        key = (self.segs.find(s1), self.segs.find(s2))
        other = self._ratio_key.get(key)
        if other is None:
            self._ratio_key[key] = rid
            return
        if self.ratios.find(other) != self.ratios.find(rid):
            self.ratios.union(rid, other, _RENORM)
            m1 = self._ratio_for((key[1], key[0]), self._ratio_rep[rid][::-1])
            m2 = self._ratio_for((key[1], key[0]), self._ratio_rep[other][::-1])
            self.ratios.union(m1, m2, _RENORM)

    def _union_segs(self, s1: frozenset, s2: frozenset, cause: Fact) -> None:
        self.segs.add(s1)
        self.segs.add(s2)
        r1, r2 = self.segs.find(s1), self.segs.find(s2)
        if r1 == r2:
            return
        affected = self._segroot_ratios.pop(r1, set()) | self._segroot_ratios.pop(
            r2, set()
        )
        self.segs.union(s1, s2, cause)
        root = self.segs.find(s1)
        self._segroot_ratios[root] |= affected
        for rid in sorted(affected):
            self._rehome_ratio(rid)

    # -- adding facts ---------------------------------------------------------

    def add_fact(self, f: Fact, record: DeductionRecord,
                 step_index: int | None = None) -> int:
        """Record an explicit fact and absorb it into the class structures."""
        if f in self.fact_ids:
            fid = self.fact_ids[f]
            if record not in self.facts[f]:
                self.facts[f].append(record)
            return fid
        fid = len(self.fact_list)
        self.fact_list.append(f)
        self.fact_ids[f] = fid
        self.facts[f] = [record]
        self.by_pred[f.pred].append(f)
        self.delta_facts[f.pred].append(f)
        self.points.update(f.args)
        if step_index is not None:
            self.inputs[f] = step_index
        a = f.args
        if f.pred == "coll":
            self._add_coll(a, f)
        elif f.pred == "para":
            la = self.line_of(a[0], a[1])
            lb = self.line_of(a[2], a[3])
            if self.line_find(la) != self.line_find(lb):
                self._merge_dirs(la, lb, f)
        elif f.pred == "perp":
            la = self.line_of(a[0], a[1])
            lb = self.line_of(a[2], a[3])
            d1, d2 = self.dirs.find(la), self.dirs.find(lb)
            e1 = self._angle_for((d1, d2), ((a[0], a[1]), (a[2], a[3])))
            e2 = self._angle_for((d2, d1), ((a[2], a[3]), (a[0], a[1])))
            self.angles.union(e1, self.RIGHT, f)
            self.angles.union(e2, self.RIGHT, f)
        elif f.pred == "cong":
            self._union_segs(_seg(a[0], a[1]), _seg(a[2], a[3]), f)
        elif f.pred == "cyclic":
            self._add_circle_pts(a, f)
        elif f.pred == "circle":
            self._add_circle_pts(a[1:], f, center=a[0])
        elif f.pred == "eqangle":
            k1 = self.angle_key(a[0], a[1], a[2], a[3])
            k2 = self.angle_key(a[4], a[5], a[6], a[7])
            e1 = self._angle_for(k1, ((a[0], a[1]), (a[2], a[3])))
            e2 = self._angle_for(k2, ((a[4], a[5]), (a[6], a[7])))
            self.angles.union(e1, e2, f)
            m1 = self._angle_for((k1[1], k1[0]), ((a[2], a[3]), (a[0], a[1])))
            m2 = self._angle_for((k2[1], k2[0]), ((a[6], a[7]), (a[4], a[5])))
            self.angles.union(m1, m2, f)
        elif f.pred in ("simtri", "contri"):
            uf = self.simtris if f.pred == "simtri" else self.contris
            t1, t2 = a[:3], a[3:]
            # union every simultaneous permutation frame: the correspondence
            # is reflection-agnostic under unsigned lengths / mod-pi angles
            for i, j, k in itertools.permutations((0, 1, 2)):
                uf.union((t1[i], t1[j], t1[k]), (t2[i], t2[j], t2[k]), f)
        elif f.pred == "eqratio":
            k1 = self.ratio_key(a[0], a[1], a[2], a[3])
            k2 = self.ratio_key(a[4], a[5], a[6], a[7])
            e1 = self._ratio_for(k1, ((a[0], a[1]), (a[2], a[3])))
            e2 = self._ratio_for(k2, ((a[4], a[5]), (a[6], a[7])))
            self.ratios.union(e1, e2, f)
            m1 = self._ratio_for((k1[1], k1[0]), ((a[2], a[3]), (a[0], a[1])))
            m2 = self._ratio_for((k2[1], k2[0]), ((a[6], a[7]), (a[4], a[5])))
            self.ratios.union(m1, m2, f)
        return fid

    def register_points(self, names: Iterable[str]) -> None:
        self.points.update(names)

    # -- queries ----------------------------------------------------------------

    def tautology(self, f: Fact) -> bool:
        a = f.args
        if f.pred == "coll":
            return len(set(a)) <= 2
        if f.pred == "cyclic":
            return len(set(a)) <= 3
        if f.pred == "cong":
            return _seg(a[0], a[1]) == _seg(a[2], a[3])
        if f.pred == "para":
            return _seg(a[0], a[1]) == _seg(a[2], a[3])
        if f.pred in ("eqangle", "eqratio"):
            p = (_seg(a[0], a[1]), _seg(a[2], a[3]))
            q = (_seg(a[4], a[5]), _seg(a[6], a[7]))
            return p == q
        if f.pred in ("simtri", "contri"):
            return a[:3] == a[3:]
        return False

    def structural_tautology(self, f: Fact) -> bool:
        """True when `f` holds by construction of the class structures alone
        (equal angle/ratio keys, one shared line) rather than by class
        content.  Such instances are ordering accidents of whichever engine
        asserted them, so the implied-fact comparison set excludes them."""
        if self.tautology(f):
            return True
        a = f.args
        if f.pred == "para":
            la = self.line_of(a[0], a[1], create=False)
            lb = self.line_of(a[2], a[3], create=False)
            return la is not None and la == lb
        if f.pred == "eqangle":
            k1 = self.angle_dir_key(a[0], a[1], a[2], a[3])
            k2 = self.angle_dir_key(a[4], a[5], a[6], a[7])
            return k1 is not None and k1 == k2
        if f.pred == "eqratio":
            k1 = (self._seg_root(a[0], a[1]), self._seg_root(a[2], a[3]))
            k2 = (self._seg_root(a[4], a[5]), self._seg_root(a[6], a[7]))
            return k1 == k2
        return False

    def angle_dir_key(self, p1, p2, p3, p4):
        """Current direction-root pair of an angle, or None if a side has no
        recorded line."""
        la = self.line_of(p1, p2, create=False)
        lb = self.line_of(p3, p4, create=False)
        if la is None or lb is None:
            return None
        return (self.dirs.find(la), self.dirs.find(lb))

    def _seg_root(self, p1, p2):
        s = _seg(p1, p2)
        return self.segs.find(s) if s in self.segs.parent else s

    def knows(self, f: Fact) -> bool:
        if f in self.facts:
            return True
        if self.tautology(f):
            return True
        a = f.args
        p = f.pred
        if p == "coll":
            lid = self.line_of(a[0], a[1], create=False)
            return lid is not None and a[2] in self._line_pts[lid]
        if p == "cyclic":
            root = self.circle_through(a[0], a[1], a[2])
            return root is not None and a[3] in self._circ_pts[root]
        if p == "circle":
            root = self.circle_through(a[1], a[2], a[3])
            return root is not None and a[0] in self.circle_centers(root)
        if p == "cong":
            return self.segs.same(_seg(a[0], a[1]), _seg(a[2], a[3]))
        if p == "para":
            la = self.line_of(a[0], a[1], create=False)
            lb = self.line_of(a[2], a[3], create=False)
            if la is None or lb is None:
                return False
            if la == lb:
                return True  # collinear points: directions trivially agree
            return self.dirs.find(la) == self.dirs.find(lb)
        if p == "perp":
            la = self.line_of(a[0], a[1], create=False)
            lb = self.line_of(a[2], a[3], create=False)
            if la is None or lb is None:
                return False
            e = self._angle_key.get((self.dirs.find(la), self.dirs.find(lb)))
            return e is not None and self.angles.same(e, self.RIGHT)
        if p == "eqangle":
            k1 = self.angle_key(a[0], a[1], a[2], a[3], create=False)
            k2 = self.angle_key(a[4], a[5], a[6], a[7], create=False)
            if k1 is None or k2 is None:
                return False
            if k1 == k2:
                return True
            e1, e2 = self._angle_key.get(k1), self._angle_key.get(k2)
            return e1 is not None and e2 is not None and self.angles.same(e1, e2)
        if p == "eqratio":
            k1 = self.ratio_key(a[0], a[1], a[2], a[3], create=False)
            k2 = self.ratio_key(a[4], a[5], a[6], a[7], create=False)
            if k1 is None or k2 is None:
                return False
            if k1 == k2:
                return True
            e1, e2 = self._ratio_key.get(k1), self._ratio_key.get(k2)
            return e1 is not None and e2 is not None and self.ratios.same(e1, e2)
        if p in ("simtri", "contri"):
            uf = self.simtris if p == "simtri" else self.contris
            return uf.same(a[:3], a[3:])
        return False

    def query(self, f: Fact) -> bool:
        for name in f.args:
            if name not in self.points:
                raise UnknownPoint(name)
        return self.knows(f)

    def right_keys(self) -> list[tuple[int, int]]:
        """Current ordered direction-pair keys known to be right angles."""
        out = set()
        for aid in self.angles.class_members(self.RIGHT):
            if aid == self.RIGHT:
                continue
            d1, d2 = self._angle_of[aid]
            d1, d2 = self.dirs.find(d1), self.dirs.find(d2)
            if d1 != d2:
                out.add((d1, d2))
        return sorted(out)

    # -- delta bookkeeping ------------------------------------------------------

    def clear_dirty(self) -> None:
        self.delta_facts = defaultdict(list)
        self.dirty_lines = set()
        self.dirty_circles = set()
        self.dirs.dirty = set()
        self.segs.dirty = set()
        self.angles.dirty = set()
        self.ratios.dirty = set()

    # -- proof reconstruction ----------------------------------------------------

    def _prune_join(self, causes: list[Fact], pts: set[str],
                    share: int) -> list[Fact]:
        """Minimal-ish subset of `causes` whose share-`share` merge closure
        connects all of `pts`."""
        pts = set(pts)

        def comps_ok(fs):
            comps = [set(f.args) for f in fs]
            changed = True
            while changed:
                changed = False
                for i in range(len(comps)):
                    if not comps[i]:
                        continue
                    for j in range(len(comps)):
                        if i != j and comps[j] and len(comps[i] & comps[j]) >= share:
                            comps[i] |= comps[j]
                            comps[j] = set()
                            changed = True
            return any(pts <= c for c in comps)

        keep = list(dict.fromkeys(causes))
        if not comps_ok(keep):
            raise AssertionError(f"join causes cannot connect {sorted(pts)}")
        for c in list(keep):
            trial = [x for x in keep if x is not c]
            if comps_ok(trial):
                keep = trial
        return keep

    def _coll_join(self, root: int, pts: Iterable[str]) -> list[Fact]:
        pts = set(pts)
        if len(pts) <= 2:
            return []
        return self._prune_join(self._line_causes[root], pts, share=2)

    def _prune_join_circ(self, causes: list[Fact], pts: set[str]) -> list[Fact]:
        def argset(f: Fact) -> set:
            return set(f.args[1:]) if f.pred == "circle" else set(f.args)

        def centerset(f: Fact) -> set:
            return {f.args[0]} if f.pred == "circle" else set()

        def comps_ok(fs):
            comps = [(argset(f), centerset(f)) for f in fs]
            changed = True
            while changed:
                changed = False
                for i in range(len(comps)):
                    pi, ci = comps[i]
                    if not pi:
                        continue
                    for j in range(len(comps)):
                        pj, cj = comps[j]
                        if i == j or not pj:
                            continue
                        if len(pi & pj) >= 3 or (ci & cj and pi & pj):
                            comps[i] = (pi | pj, ci | cj)
                            pi, ci = comps[i]
                            comps[j] = (set(), set())
                            changed = True
            return any(pts <= p for p, _ in comps)

        keep = list(dict.fromkeys(causes))
        if not comps_ok(keep):
            raise AssertionError(f"circle join cannot connect {sorted(pts)}")
        for c in list(keep):
            trial = [x for x in keep if x is not c]
            if comps_ok(trial):
                keep = trial
        return keep

    def _align_dir(self, seg_a: tuple, seg_b: tuple) -> list[Fact]:
        """Explicit para/coll facts witnessing dir(seg_a) == dir(seg_b)."""
        la = self._pair_line[_seg(*seg_a)]
        lb = self._pair_line[_seg(*seg_b)]
        ra, rb = self.line_find(la), self.line_find(lb)
        if ra == rb:
            return self._coll_join(ra, set(seg_a) | set(seg_b))
        edges = self.dirs.explain(ra, rb)
        premises: list[Fact] = []
        root_pts: dict[int, set] = defaultdict(set)
        root_pts[ra].update(seg_a)
        root_pts[rb].update(seg_b)
        for _, _, cause in edges:
            if cause is _RENORM:
                continue
            premises.append(cause)
            if cause.pred == "para":
                c = cause.args
                for s in ((c[0], c[1]), (c[2], c[3])):
                    root = self.line_find(self._pair_line[_seg(*s)])
                    root_pts[root].update(s)
            else:  # coll cause from a line merge
                root = self.line_find(self._pair_line[_seg(cause.args[0], cause.args[1])])
                root_pts[root].update(cause.args)
        for root, pts in sorted(root_pts.items()):
            if len(pts) >= 3:
                premises.extend(self._coll_join(root, pts))
        return list(dict.fromkeys(premises))

    def _align_len(self, seg_a: frozenset, seg_b: frozenset) -> list[Fact]:
        if seg_a == seg_b:
            return []
        return [c for _, _, c in self.segs.explain(seg_a, seg_b)
                if c is not _RENORM]

    def expand_implied(self, f: Fact) -> tuple[str, list[Fact]]:
        """Structural rule id plus explicit premise facts justifying an
        implied (non-explicit) fact."""
        a = f.args
        p = f.pred
        if p == "coll":
            root = self.line_of(a[0], a[1], create=False)
            return "coll_chain", self._coll_join(root, a)
        if p == "cyclic":
            root = self.circle_through(a[0], a[1], a[2])
            return "cyclic_chain", self._prune_join_circ(
                self._circ_causes[root], set(a)
            )
        if p == "circle":
            root = self.circle_through(a[1], a[2], a[3])
            cause = next(
                fc for name, fc in self._circ_centers[root] if name == a[0]
            )
            pts = set(a[1:]) | set(cause.args[1:])
            prems = self._prune_join_circ(
                list(dict.fromkeys([cause] + self._circ_causes[root])), pts
            )
            if cause not in prems:
                prems.insert(0, cause)
            return "circle_chain", prems
        if p == "cong":
            return "cong_chain", self._align_len(_seg(a[0], a[1]), _seg(a[2], a[3]))
        if p == "para":
            return "para_chain", self._align_dir((a[0], a[1]), (a[2], a[3]))
        if p == "perp":
            la = self.line_of(a[0], a[1], create=False)
            lb = self.line_of(a[2], a[3], create=False)
            e = self._angle_key[(self.dirs.find(la), self.dirs.find(lb))]
            prems: list[Fact] = []
            used_segs: dict[int, list[tuple]] = defaultdict(list)
            for s in ((a[0], a[1]), (a[2], a[3])):
                used_segs[self.dirs.find(self.line_of(*s, create=False))].append(s)
            for _, _, cause in self.angles.explain(e, self.RIGHT):
                if cause is _RENORM:
                    continue
                prems.append(cause)
                c = cause.args
                csegs = [(c[i], c[i + 1]) for i in range(0, len(c), 2)]
                for s in csegs:
                    root = self.dirs.find(self.line_of(*s, create=False))
                    used_segs[root].append(s)
            for root in sorted(used_segs):
                chain = list(dict.fromkeys(used_segs[root]))
                for sa, sb in zip(chain, chain[1:]):
                    prems.extend(self._align_dir(sa, sb))
            return "perp_para", list(dict.fromkeys(prems))
        if p == "eqangle":
            segs = ((a[0], a[1]), (a[2], a[3]), (a[4], a[5]), (a[6], a[7]))
            k1 = self.angle_key(*a[0:4], create=False)
            k2 = self.angle_key(*a[4:8], create=False)
            prems: list[Fact] = []
            used_segs: dict[int, list[tuple]] = defaultdict(list)
            for s in segs:
                root = self.dirs.find(self.line_of(*s, create=False))
                used_segs[root].append(s)
            if k1 != k2:
                e1, e2 = self._angle_key[k1], self._angle_key[k2]
                for _, _, cause in self.angles.explain(e1, e2):
                    if cause is _RENORM:
                        continue
                    prems.append(cause)
                    c = cause.args
                    # causes are eqangle (8 args) or, when the path runs
                    # through the right-angle class, perp (4 args)
                    for s in [(c[i], c[i + 1]) for i in range(0, len(c), 2)]:
                        root = self.dirs.find(self.line_of(*s, create=False))
                        used_segs[root].append(s)
            for root in sorted(used_segs):
                chain = list(dict.fromkeys(used_segs[root]))
                for sa, sb in zip(chain, chain[1:]):
                    prems.extend(self._align_dir(sa, sb))
            return "eqangle_chain", list(dict.fromkeys(prems))
        if p == "eqratio":
            segs = (_seg(a[0], a[1]), _seg(a[2], a[3]), _seg(a[4], a[5]),
                    _seg(a[6], a[7]))
            k1 = self.ratio_key(*a[0:4], create=False)
            k2 = self.ratio_key(*a[4:8], create=False)
            prems = []
            used: dict[frozenset, list[frozenset]] = defaultdict(list)
            for s in segs:
                used[self.segs.find(s)].append(s)
            if k1 != k2:
                e1, e2 = self._ratio_key[k1], self._ratio_key[k2]
                for _, _, cause in self.ratios.explain(e1, e2):
                    if cause is _RENORM:
                        continue
                    prems.append(cause)
                    c = cause.args
                    for s in (_seg(c[0], c[1]), _seg(c[2], c[3]),
                              _seg(c[4], c[5]), _seg(c[6], c[7])):
                        used[self.segs.find(s)].append(s)
            for root in sorted(used, key=sorted):
                chain = list(dict.fromkeys(used[root]))
                for sa, sb in zip(chain, chain[1:]):
                    prems.extend(self._align_len(sa, sb))
            return "eqratio_chain", list(dict.fromkeys(prems))
        if p in ("simtri", "contri"):
            uf = self.simtris if p == "simtri" else self.contris
            prems = [c for _, _, c in uf.explain(a[:3], a[3:])
                     if c is not _RENORM]
            return p + "_chain", list(dict.fromkeys(prems))
        raise ValueError(f"cannot expand {f}")

    def materialize(self, f: Fact, _seen: frozenset = frozenset()) -> int:
        """Assign an id to a fact matched from a class structure, recording
        its reconstructed structural derivation."""
        if f in self.fact_ids:
            return self.fact_ids[f]
        if f in _seen:
            raise AssertionError(f"cyclic materialization of {f}")
        rule_id, prems = self.expand_implied(f)
        seen = _seen | {f}
        pids = tuple(self.materialize(p, seen) for p in prems)
        iteration = max(
            (self.facts[self.fact_list[i]][0].iteration for i in pids), default=0
        )
        return self.add_fact(f, DeductionRecord(rule_id, pids, iteration))

    # -- materialized views -------------------------------------------------------

    def all_facts(self, include_tautologies: bool = False) -> set[Fact]:
        """Every explicit and class-implied fact, materialized (for the
        brute-force oracle comparison; exponential-ish, small inputs only).

        With `include_tautologies`, also lists structurally true instances
        (same-key angle/ratio equalities, same-line parallels) so a
        brute-force matcher sees the same premise candidates the production
        matcher enumerates."""
        if include_tautologies:
            out: set[Fact] = set(self.facts)
        else:
            # an explicit fact whose keys later collapsed is structurally
            # true; which engine happened to derive it explicitly is an
            # ordering accident, so the comparison set drops them uniformly
            out = {
                f for f in self.facts
                if not self.structural_tautology(f)
            }
        for root in self.lines(3):
            for trip in itertools.combinations(self._line_pts[root], 3):
                out.add(make_fact("coll", trip))
        for root in self.circles(4):
            for quad in itertools.combinations(self._circ_pts[root], 4):
                out.add(make_fact("cyclic", quad))
        for root in self.circles(3):
            for o in self.circle_centers(root):
                for trip in itertools.combinations(self._circ_pts[root], 3):
                    out.add(make_fact("circle", (o,) + trip))
        for root in {self.segs.find(s) for s in self.segs.parent}:
            mem = sorted(self.segs.members[root], key=sorted)
            for s1, s2 in itertools.combinations(mem, 2):
                out.add(make_fact("cong", tuple(sorted(s1)) + tuple(sorted(s2))))
        for droot, lroots in self._dir_lines.items():
            pairs = []
            for lr in lroots:
                pts = self._line_pts.get(lr)
                if pts is None:
                    continue
                pairs.extend((lr, pq) for pq in itertools.combinations(pts, 2))
            if include_tautologies:
                for (l1, p1), (l2, p2) in itertools.combinations_with_replacement(
                    pairs, 2
                ):
                    out.add(make_fact("para", p1 + p2))
            else:
                for (l1, p1), (l2, p2) in itertools.combinations(pairs, 2):
                    if l1 != l2:
                        out.add(make_fact("para", p1 + p2))
        for d1, d2 in self.right_keys():
            for p1 in self._dir_pairs(d1):
                for p2 in self._dir_pairs(d2):
                    out.add(make_fact("perp", p1 + p2))
        for root in {self.angles.find(x) for x in self.angles.parent}:
            mem = sorted(set(self.angles.members[root]))
            reps = []
            for aid in mem:
                if aid == self.RIGHT:
                    continue
                d1, d2 = (self.dirs.find(d) for d in self._angle_of[aid])
                for p1 in self._dir_pairs(d1):
                    for p2 in self._dir_pairs(d2):
                        reps.append(p1 + p2)
            if include_tautologies:
                for t1, t2 in itertools.combinations_with_replacement(
                    sorted(set(reps)), 2
                ):
                    out.add(make_fact("eqangle", t1 + t2))
            else:
                for t1, t2 in itertools.combinations(sorted(set(reps)), 2):
                    f = make_fact("eqangle", t1 + t2)
                    if not self.structural_tautology(f):
                        out.add(f)
        for root in {self.ratios.find(x) for x in self.ratios.parent}:
            mem = sorted(set(self.ratios.members[root]))
            reps = []
            for rid in mem:
                s1, s2 = self._ratio_of[rid]
                for q1 in self._segclass_pairs(s1):
                    for q2 in self._segclass_pairs(s2):
                        reps.append(q1 + q2)
            if include_tautologies:
                for t1, t2 in itertools.combinations_with_replacement(
                    sorted(set(reps)), 2
                ):
                    out.add(make_fact("eqratio", t1 + t2))
            else:
                for t1, t2 in itertools.combinations(sorted(set(reps)), 2):
                    f = make_fact("eqratio", t1 + t2)
                    if not self.structural_tautology(f):
                        out.add(f)
        for pred, uf in (("simtri", self.simtris), ("contri", self.contris)):
            for root in {uf.find(x) for x in uf.parent}:
                mem = sorted(uf.members[root])
                for t1, t2 in itertools.combinations(mem, 2):
                    f = make_fact(pred, t1 + t2)
                    if not self.tautology(f):
                        out.add(f)
        return out

    def _dir_pairs(self, droot: int) -> list[tuple]:
        pairs = []
        for lr in sorted(self._dir_lines.get(droot, ())):
            pts = self._line_pts.get(lr)
            if pts is None:
                continue
            for pq in itertools.combinations(pts, 2):
                pairs.append(pq)
        return pairs

    def _segclass_pairs(self, seg: frozenset) -> list[tuple]:
        if seg not in self.segs:
            return [tuple(sorted(seg))]
        return sorted(
            tuple(sorted(s)) for s in self.segs.class_members(seg)
        )
