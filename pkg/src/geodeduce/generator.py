"""Synthetic problem generation.

Samples random construction sequences, saturates them, and turns derived
facts into problems whose statement is supported by a context prefix while
the proof needs further (auxiliary) constructions.  Emitted problems are
deduplicated by a digest of their canonical form in an append-only store.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator

from .actions import CATALOG, ConstructionStep, canonical_inputs
from .diagram import DegeneracyReport, check_fact, instantiate
from .facts import Fact
from .problem import Problem, canonicalize
from .rules import Rule
from .saturate import SaturationLimits, saturate_problem, seed_facts
from .trace import GoalNotDerived, minimize, trace


class StoreUnavailable(RuntimeError):
    pass


def default_action_weights() -> dict[str, float]:
    out = {}
    for name, sig in CATALOG.items():
        if name == "free":
            continue
        out[name] = 0.2 if sig.composite else 1.0
    return out


@dataclass
class GeneratorConfig:
    n_free: tuple[int, int] = (3, 3)
    max_depth: int = 6
    action_weights: dict[str, float] = field(
        default_factory=default_action_weights
    )
    goals_per_tree: int = 8
    seed: int = 0
    dedup_store: str | None = None
    limits: SaturationLimits = field(
        default_factory=lambda: SaturationLimits(timeout=10.0)
    )

    def __post_init__(self):
        ws = self.action_weights.values()
        if any(w < 0 for w in ws) or not any(w > 0 for w in ws):
            raise ValueError("weights must be nonnegative, one positive")


@dataclass(frozen=True)
class GeneratedProblem:
    context: tuple[ConstructionStep, ...]
    auxiliaries: tuple[ConstructionStep, ...]
    goal: Fact
    canonical_key: str
    difficulty: dict  # proof_depth, n_rules, n_aux

    @property
    def full_steps(self) -> tuple[ConstructionStep, ...]:
        return self.context + self.auxiliaries


def dedup_key(steps: tuple[ConstructionStep, ...], goal: Fact) -> str:
    """Collision-resistant digest of the canonical problem form."""
    text = canonicalize(Problem(tuple(steps), goal)).canonical_text
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# dedup store


class DedupStore:
    """Append-only key log plus a JSONL metadata sidecar."""

    def __init__(self, path: str | None):
        self.path = path
        self.keys: set[str] = set()
        if path is None:
            return
        try:
            os.makedirs(path, exist_ok=True)
            keyfile = os.path.join(path, "keys.log")
            if os.path.exists(keyfile):
                with open(keyfile) as fh:
                    self.keys.update(line.strip() for line in fh if line.strip())
        except OSError as e:
            raise StoreUnavailable(str(e)) from e

    def __contains__(self, key: str) -> bool:
        return key in self.keys

    def add(self, problem: GeneratedProblem) -> None:
        self.keys.add(problem.canonical_key)
        if self.path is None:
            return
        try:
            with open(os.path.join(self.path, "keys.log"), "a") as fh:
                fh.write(problem.canonical_key + "\n")
            with open(os.path.join(self.path, "meta.jsonl"), "a") as fh:
                fh.write(json.dumps({
                    "key": problem.canonical_key,
                    "goal_pred": problem.goal.pred,
                    "n_aux": len(problem.auxiliaries),
                    **problem.difficulty,
                }) + "\n")
        except OSError as e:
            raise StoreUnavailable(str(e)) from e


def stats(store_path: str) -> dict:
    """Counts by goal predicate, auxiliary count, and proof depth."""
    by_pred: Counter = Counter()
    by_aux: Counter = Counter()
    by_depth: Counter = Counter()
    total = 0
    meta = os.path.join(store_path, "meta.jsonl")
    try:
        if os.path.exists(meta):
            with open(meta) as fh:
                for line in fh:
                    rec = json.loads(line)
                    total += 1
                    by_pred[rec["goal_pred"]] += 1
                    by_aux[rec["n_aux"]] += 1
                    by_depth[rec["proof_depth"]] += 1
    except OSError as e:
        raise StoreUnavailable(str(e)) from e
    return {
        "total": total,
        "by_goal_pred": dict(by_pred),
        "by_n_aux": dict(by_aux),
        "by_proof_depth": dict(by_depth),
    }


# ---------------------------------------------------------------------------
# tree sampling


_NAMES = [chr(ord("A") + i) for i in range(26)]


def sample_construction(rng: random.Random,
                        cfg: GeneratorConfig) -> tuple[ConstructionStep, ...]:
    steps: list[ConstructionStep] = []
    points: list[str] = []
    existing: set[tuple] = set()

    def emit(action: str, ins: tuple[str, ...]) -> None:
        sig = CATALOG[action]
        outs = tuple(
            _NAMES[len(points) + i] if len(points) + i < 26
            else f"P{len(points) + i}"
            for i in range(sig.n_out)
        )
        step = ConstructionStep(action, ins, outs)
        steps.append(step)
        points.extend(outs)
        existing.add((action, canonical_inputs(step, points.index)))

    for _ in range(rng.randint(*cfg.n_free)):
        emit("free", ())
    names = sorted(a for a, w in cfg.action_weights.items()
                   if w > 0 and a != "free")
    weights = [cfg.action_weights[a] for a in names]
    budget = cfg.max_depth
    attempts = 0
    while budget > 0 and attempts < 20 * cfg.max_depth:
        attempts += 1
        action = rng.choices(names, weights)[0]
        sig = CATALOG[action]
        if sig.n_in > len(points):
            continue
        ins = tuple(rng.sample(points, sig.n_in))
        probe = ConstructionStep(action, ins, ("_",) * sig.n_out)
        if (action, canonical_inputs(probe, points.index)) in existing:
            continue
        emit(action, ins)
        budget -= 1
    return tuple(steps)


# ---------------------------------------------------------------------------
# problem extraction


def proof_depth(dag) -> int:
    depths = []
    for node in dag.nodes:
        if node.rule_id == "input":
            depths.append(0)
        else:
            depths.append(1 + max((depths[p] for p in node.premises),
                                  default=0))
    return max(depths, default=0)


def _trivial(goal: Fact, seeds: set[Fact], depth: int) -> bool:
    return goal in seeds or depth < 2 or goal.pred in ("midp", "circle")


def _numeric_ok(steps, goal: Fact, base_seed: int) -> bool:
    """Goal true on 3 fresh non-degenerate instantiations."""
    ok = 0
    for s in range(base_seed, base_seed + 20):
        d = instantiate(steps, seed=s)
        if isinstance(d, DegeneracyReport):
            continue
        if not check_fact(d, goal, 1e-7):
            return False
        ok += 1
        if ok == 3:
            return True
    return False


def extract_problems(tree: tuple[ConstructionStep, ...], rules: list[Rule],
                     cfg: GeneratorConfig,
                     tree_seed: int) -> Iterator[GeneratedProblem]:
    diagram = None
    for s in range(tree_seed, tree_seed + 5):
        d = instantiate(tree, seed=s)
        if not isinstance(d, DegeneracyReport):
            diagram = d
            break
    if diagram is None:
        return
    full = Problem(tree, None)
    db = saturate_problem(full, rules, limits=cfg.limits, diagram=diagram)
    seeds = {f for f, _ in seed_facts(full)}
    defining = {p: i for i, st in enumerate(tree) for p in st.outputs}
    anc_cache: dict[int, set[int]] = {}
    ctx_cache: dict[frozenset, "FactDb | None"] = {}
    candidates = 0
    for goal in sorted(db.all_facts(), key=str):
        if candidates >= cfg.goals_per_tree:
            return
        if any(a not in defining for a in goal.args):
            continue
        try:
            dag = trace(db, goal)
        except GoalNotDerived:
            continue
        depth = proof_depth(dag)
        if _trivial(goal, seeds, depth):
            continue
        prob = Problem(tree, goal)
        # context = ancestor closure of the goal's argument points
        context_idx: set[int] = set()
        for a in goal.args:
            i = defining[a]
            if i not in anc_cache:
                anc_cache[i] = prob.step_ancestors(i) | {i}
            context_idx |= anc_cache[i]
        # minimizing only removes steps, so a trace confined to the
        # ancestor closure can never yield auxiliaries: skip it cheaply
        if all(i in context_idx for i in dag.used_constructions):
            continue
        candidates += 1
        context = tuple(tree[i] for i in sorted(context_idx))
        # triple certificate: stateable from context, underivable from
        # context alone, derivable with auxiliaries, numerically true.
        # Underivability is checked before minimize: when the context
        # closure misses the goal, every proof needs non-context steps,
        # so minimize (the expensive part) only runs on emittable goals.
        ctx_key = frozenset(context_idx)
        if ctx_key not in ctx_cache:
            ctx_d = None
            for s in range(tree_seed, tree_seed + 5):
                d = instantiate(context, seed=s)
                if not isinstance(d, DegeneracyReport):
                    ctx_d = d
                    break
            ctx_cache[ctx_key] = None if ctx_d is None else saturate_problem(
                Problem(context, None), rules, limits=cfg.limits,
                diagram=ctx_d)
        ctx_db = ctx_cache[ctx_key]
        if ctx_db is None or ctx_db.knows(goal):
            continue
        dag = minimize(prob, dag, rules, limits=cfg.limits, seed=tree_seed)
        used = sorted(dag.used_constructions)
        aux_idx = [i for i in used if i not in context_idx]
        if not aux_idx:
            continue
        aux = tuple(tree[i] for i in aux_idx)
        if not _numeric_ok(context + aux, goal, tree_seed):
            continue
        full_db = None
        fd = None
        for s in range(tree_seed, tree_seed + 5):
            d = instantiate(context + aux, seed=s)
            if not isinstance(d, DegeneracyReport):
                fd = d
                break
        if fd is None:
            continue
        full_db = saturate_problem(Problem(context + aux, goal), rules,
                                   limits=cfg.limits, diagram=fd)
        if not full_db.knows(goal):
            continue
        rules_used = {
            n.rule_id for n in dag.nodes if n.rule_id != "input"
        }
        yield GeneratedProblem(
            context, aux, goal,
            dedup_key(context + aux, goal),
            {"proof_depth": depth, "n_rules": len(rules_used),
             "n_aux": len(aux)},
        )


def generate(cfg: GeneratorConfig, rules: list[Rule],
             count: int | None = None,
             max_trees: int | None = None,
             stats: dict | None = None) -> Iterator[GeneratedProblem]:
    """Deterministic stream of unique auxiliary-requiring problems.

    ``max_trees`` bounds the number of construction trees sampled, so a
    run against a store that already contains every key still terminates.
    When ``stats`` is given, the number of trees consumed and problems
    emitted so far is recorded under ``"trees"`` / ``"emitted"``.
    """
    rng = random.Random(cfg.seed)
    store = DedupStore(cfg.dedup_store)
    emitted = 0
    trees = 0
    while count is None or emitted < count:
        if max_trees is not None and trees >= max_trees:
            return
        tree_seed = rng.randrange(2**31)
        tree = sample_construction(rng, cfg)
        trees += 1
        if stats is not None:
            stats["trees"] = trees
            stats["emitted"] = emitted
        for gp in extract_problems(tree, rules, cfg, tree_seed):
            if gp.canonical_key in store:
                continue
            store.add(gp)
            emitted += 1
            if stats is not None:
                stats["emitted"] = emitted
            yield gp
            if count is not None and emitted >= count:
                return


# ---------------------------------------------------------------------------
# record format


def format_record(gp: GeneratedProblem) -> str:
    """DSL text with auxiliaries prefixed `! `, goal line, metadata comment."""
    lines = [str(s) for s in gp.context]
    lines += [f"! {s}" for s in gp.auxiliaries]
    lines.append(f"?- {gp.goal}")
    d = gp.difficulty
    lines.append(
        f"# key={gp.canonical_key} depth={d['proof_depth']} "
        f"rules={d['n_rules']} aux={d['n_aux']}"
    )
    return "\n".join(lines)
