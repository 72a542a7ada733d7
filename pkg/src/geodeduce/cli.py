"""Command-line entry point: prove, generate, check, bench.

Exit codes: 0 solved/ok, 2 not solved, 1 error.  Every flag can also come
from a key=value config file (--config) or a GEODEDUCE_-prefixed
environment variable; precedence is flags > environment > file > defaults.
The fully resolved configuration is echoed on startup for reproducibility.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
import time

from .checker import check_proof
from .diagram import DegeneracyReport, instantiate
from .generator import (DedupStore, GeneratorConfig, StoreUnavailable,
                        format_record, generate, stats)
from .naive import saturate_problem_naive
from .policy import PolicyUnavailable, make_policy
from .problem import ParseError, Problem, parse, parse_steps
from .rules import RuleSyntaxError, load_rules
from .saturate import SaturationLimits, saturate_problem
from .search import SearchConfig, solve
from .trace import DagSyntaxError, parse_dag, serialize_dag


def _default_rules() -> str:
    return os.path.join(os.path.dirname(__file__), "rules.txt")


def _resolve(args: argparse.Namespace, parser: argparse.ArgumentParser,
             command: str, argv: list[str]) -> dict:
    """Overlay file and environment values onto flag defaults; explicit
    flags win.  Returns the resolved mapping."""
    resolved = vars(args).copy()
    given = {tok.split("=", 1)[0] for tok in argv}
    explicit: set[str] = set()
    for action in parser._subparsers._group_actions[0].choices[
            args.command]._actions:
        if any(opt in given for opt in action.option_strings):
            explicit.add(action.dest)
    layers = []
    if resolved.get("config"):
        layer = {}
        with open(resolved["config"]) as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"bad config line {line!r}")
                k, v = line.split("=", 1)
                layer[k.strip().replace("-", "_")] = v.strip()
        layers.append(layer)
    env = {
        k[len("GEODEDUCE_"):].lower(): v
        for k, v in os.environ.items() if k.startswith("GEODEDUCE_")
    }
    layers.append(env)
    for layer in layers:
        for k, v in layer.items():
            if k in resolved and k not in explicit:
                cur = resolved[k]
                if isinstance(cur, bool):
                    resolved[k] = v.lower() in ("1", "true", "yes")
                elif isinstance(cur, int):
                    resolved[k] = int(v)
                elif isinstance(cur, float):
                    resolved[k] = float(v)
                else:
                    resolved[k] = v
    for k, v in sorted(resolved.items()):
        if k not in ("config", "func"):
            print(f"config: {command}.{k}={v}", file=sys.stderr)
    return resolved


def _load_problem(path: str, allow_undefined: bool = False) -> Problem:
    with open(path) as fh:
        return parse(fh.read(), allow_undefined_goal_points=allow_undefined)


# ---------------------------------------------------------------------------
# prove


def cmd_prove(cfg: dict) -> int:
    rules = load_rules(cfg["rules"])
    problem = _load_problem(cfg["problem"], allow_undefined=True)
    policy = make_policy(cfg["policy"], timeout=cfg["timeout"])
    scfg = SearchConfig(
        beam_width=cfg["beam_width"], expand_k=cfg["expand_k"],
        max_steps=cfg["max_steps"],
        limits=SaturationLimits(timeout=cfg["timeout"]),
        worker_count=cfg["threads"], seed=cfg["seed"],
    )
    result = solve(problem, rules, policy, scfg)
    for line in result.telemetry.lines():
        print(line)
    print(f"aux: {len(result.aux)}")
    if not result.solved:
        print(f"status: {result.status}")
        return 2
    full = Problem(problem.context + result.aux, problem.goal)
    if not check_proof(full, result.proof, rules):
        raise AssertionError("internal error: unverifiable proof")
    text = "".join(f"aux {s}\n" for s in result.aux)
    text += serialize_dag(result.proof) + "\n"
    if cfg["out"]:
        with open(cfg["out"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print("status: solved")
    return 0


# ---------------------------------------------------------------------------
# generate


def cmd_generate(cfg: dict) -> int:
    rules = load_rules(cfg["rules"])
    lo, _, hi = cfg["points"].partition(":")
    n_free = (int(lo), int(hi or lo))
    out = open(cfg["out"], "w") if cfg["out"] else sys.stdout
    try:
        threads = max(1, cfg["threads"])
        shard_counts = [cfg["count"] // threads] * threads
        shard_counts[0] += cfg["count"] - sum(shard_counts)
        store = DedupStore(cfg["store"])
        known = set(store.keys)
        written = 0
        for shard, target in enumerate(shard_counts):
            if target == 0:
                continue
            gcfg = GeneratorConfig(
                n_free=n_free, max_depth=cfg["depth"],
                seed=cfg["seed"] + shard, dedup_store=None,
            )
            # count fixes the length of the seeded stream; the store then
            # filters out anything emitted by an earlier run, so repeating
            # a run against the same store writes nothing new
            for gp in generate(gcfg, rules, count=target):
                if gp.canonical_key in known:
                    continue
                known.add(gp.canonical_key)
                store.add(gp)
                out.write(format_record(gp) + "\n\n")
                written += 1
        print(f"{written} new", file=sys.stderr)
        if cfg["store"]:
            print(json.dumps(stats(cfg["store"])), file=sys.stderr)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


# ---------------------------------------------------------------------------
# check


def cmd_check(cfg: dict) -> int:
    rules = load_rules(cfg["rules"])
    problem = _load_problem(cfg["problem"], allow_undefined=True)
    with open(cfg["proof"]) as fh:
        lines = fh.read().splitlines()
    aux_lines = [l for l in lines if l.startswith("aux ")]
    dag_text = "\n".join(l for l in lines if not l.startswith("aux "))
    defined = {p for s in problem.context for p in s.outputs}
    aux = parse_steps("\n".join(l[len("aux "):] for l in aux_lines), defined)
    dag = parse_dag(dag_text)
    full = Problem(problem.context + tuple(aux), problem.goal)
    result = check_proof(full, dag, rules)
    if result:
        print("ok")
        return 0
    print(result.reasons[0], file=sys.stderr)
    return 2


# ---------------------------------------------------------------------------
# bench


# Dense triangle-centered configurations: every construction feeds the same
# base triangle, so the closure is substantial (hundreds of facts) and the
# benchmark exercises the matcher rather than the per-call overhead.
_BENCH_TEMPLATES = (
    """free A; free B; free C; midpoint M : A B; midpoint N : A C
       midpoint K : B C; circumcenter O : A B C; foot H : A B C
       midpoint P : M N; parallel_through Q : K A B; reflect R : O B C
       rotate_half S : A K""",
    """free A; free B; free C; circumcenter O : A B C; on_circle D : O A
       on_circle E : O B; foot H : A B C; midpoint M : B C
       midpoint N : A C; reflect R : H A B; perp_through P : M A C
       rotate_half S : B M""",
    """free A; free B; free C; midpoint M : A B; midpoint N : B C
       midpoint L : A C; circumcenter O : M N L; foot F : A B C
       parallel_through P : A B C; perp_through Q : B A C
       on_circle G : O M; rotate_half T : C N""",
)


def _closure_instances(n: int, points: int, seed: int):
    import random

    rng = random.Random(seed)
    trees = [tuple(parse_steps(t))[: points] for t in _BENCH_TEMPLATES]
    out = []
    i = 0
    while len(out) < n:
        tree = trees[i % len(trees)]
        i += 1
        d = instantiate(tree, seed=rng.randrange(2**31))
        if isinstance(d, DegeneracyReport):
            continue
        out.append((tree, d))
    return out


def cmd_bench(cfg: dict) -> int:
    if cfg["suite"] != "closure":
        print(f"unknown suite {cfg['suite']!r}", file=sys.stderr)
        return 1
    rules = load_rules(cfg["rules"])
    limits = SaturationLimits(timeout=cfg["timeout"])
    instances = _closure_instances(cfg["instances"], cfg["points"],
                                   cfg["seed"])
    times = []
    for tree, d in instances:
        t0 = time.perf_counter()
        saturate_problem(Problem(tree, None), rules, limits=limits, diagram=d)
        times.append(time.perf_counter() - t0)
    report = {
        "suite": "closure",
        "points": cfg["points"],
        "instances": len(times),
        "median_s": statistics.median(times),
        "p95_s": statistics.quantiles(times, n=20)[-1] if len(times) > 1
        else times[0],
    }
    if cfg["compare_naive"]:
        k = min(5, len(instances))
        semi = naive = 0.0
        for tree, d in instances[:k]:
            t0 = time.perf_counter()
            saturate_problem(Problem(tree, None), rules, limits=limits,
                             diagram=d)
            semi += time.perf_counter() - t0
            t0 = time.perf_counter()
            saturate_problem_naive(Problem(tree, None), rules,
                                   limits=SaturationLimits(timeout=120),
                                   diagram=d)
            naive += time.perf_counter() - t0
        report["naive_total_s"] = naive
        report["semi_total_s"] = semi
        report["speedup"] = naive / semi if semi else float("inf")
    print(json.dumps(report, indent=2))
    if cfg["out"]:
        with open(cfg["out"], "w") as fh:
            json.dump(report, fh, indent=2)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="geodeduce",
        description="synthetic-geometry deduction engine",
    )
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--rules", default=_default_rules())
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("prove", help="prove a problem, searching for "
                                     "auxiliary constructions if needed")
    common(p)
    p.add_argument("--problem", required=True)
    p.add_argument("--policy", default="none",
                   help="none|exhaustive|heuristic|exec:CMD|tcp:HOST:PORT")
    p.add_argument("--beam-width", type=int, default=8)
    p.add_argument("--expand-k", type=int, default=16)
    p.add_argument("--max-steps", type=int, default=4)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--timeout", type=float, default=30.0,
                   help="saturation / policy timeout in seconds")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("generate", help="generate unique problems that "
                                        "require auxiliary constructions")
    common(p)
    p.add_argument("--points", default="3:3", help="free-point range LO:HI")
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--store", default=None)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("check", help="verify a proof independently")
    common(p)
    p.add_argument("--proof", required=True)
    p.add_argument("--problem", required=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("bench", help="saturation micro-benchmarks")
    common(p)
    p.add_argument("--suite", default="")
    p.add_argument("--points", type=int, default=12)
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--compare-naive", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)
    return top


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args, parser, args.command, argv)
        return args.func(cfg)
    except (ParseError, RuleSyntaxError, DagSyntaxError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError, StoreUnavailable, PolicyUnavailable) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
