"""End-to-end acceptance gate.

Each test exercises one headline guarantee at its stated tolerance and
prints a single [PASS]/[FAIL] line directly to the terminal.
"""
import json
import random
import time

import pytest

from geodeduce.checker import check_proof
from geodeduce.cli import main
from geodeduce.diagram import (DegeneracyReport, check_fact, instantiate)
from geodeduce.generator import GeneratorConfig, generate
from geodeduce.naive import saturate_problem_naive
from geodeduce.policy import ExhaustivePolicy
from geodeduce.problem import Problem, parse
from geodeduce.saturate import SaturationLimits, saturate, saturate_problem
from geodeduce.search import SearchConfig, solve
from geodeduce.trace import minimize, serialize_dag, trace

from conftest import problem_files, random_problem, simple_actions

LIMITS = SaturationLimits(timeout=30)


def report(capsys, name, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" — {detail}" if detail else "")
    with capsys.disabled():
        print(f"\n{line}", flush=True)
    assert ok, line


def _diagrams(prob, want=3, tries=12):
    out = []
    for s in range(tries):
        d = instantiate(prob.context, seed=s)
        if not isinstance(d, DegeneracyReport):
            out.append(d)
        if len(out) == want:
            break
    return out


def test_fixpoint_and_soundness(rules, capsys):
    """≥1000 random sequences (4–10 points): re-saturation adds 0 facts,
    no numeric violation at 1e-7 over 3 diagram seeds each, <10 min."""
    t0 = time.monotonic()
    master = random.Random(1)
    done = resat_failures = violations = 0
    while done < 1000:
        rng = random.Random(master.randrange(2**31))
        n_free = rng.randint(3, 4)
        depth = rng.randint(1, min(8, 10 - n_free))
        prob = random_problem(rng, n_free, depth)
        diags = _diagrams(prob)
        if not diags:
            continue
        for d in diags:
            db = saturate_problem(prob, rules, limits=LIMITS, diagram=d)
            facts = db.all_facts()
            db2 = saturate([(f, 0) for f in sorted(facts)], rules,
                           limits=LIMITS, diagram=d, points=prob.points)
            if db2.all_facts() != facts:
                resat_failures += 1
            violations += sum(not check_fact(d, f, 1e-7) for f in facts)
        done += 1
    dt = time.monotonic() - t0
    ok = resat_failures == 0 and violations == 0 and dt < 600
    report(capsys, "fixpoint & soundness",
           ok, f"{done} sequences, {resat_failures} fixpoint failures, "
               f"{violations} violations at 1e-7, {dt:.0f}s")


def test_oracle_equivalence(rules, capsys):
    """200/200 instances (≤6 points, 3-rule sub-rulebase): saturate output
    set-equals the brute-force closure oracle."""
    master = random.Random(7)
    matched = done = 0
    while done < 200:
        rng = random.Random(master.randrange(2**31))
        n_free = rng.randint(3, 4)
        prob = random_problem(rng, n_free, rng.randint(1, 6 - n_free),
                              actions=simple_actions(max_in=4))
        sub_rules = rng.sample(rules, 3)
        diags = _diagrams(prob, want=1)
        if not diags:
            continue
        d = diags[0]
        fast = saturate_problem(prob, sub_rules, limits=LIMITS, diagram=d)
        slow = saturate_problem_naive(
            prob, sub_rules, limits=SaturationLimits(timeout=180), diagram=d)
        matched += fast.all_facts() == slow.all_facts()
        done += 1
    report(capsys, "oracle equivalence", matched == done,
           f"{matched}/{done} closures set-equal")


def test_named_theorems(rules, capsys):
    """≥10 classical theorems proved by saturation alone; every proof
    passes the independent checker and the minimize certificate, ≤30 s each."""
    files = problem_files()
    failures = []
    slowest = 0.0
    for path in files:
        t0 = time.monotonic()
        prob = parse(open(path).read())
        diags = _diagrams(prob, want=1)
        db = saturate_problem(prob, rules, limits=LIMITS, diagram=diags[0])
        ok = db.knows(prob.goal)
        if ok:
            dag = trace(db, prob.goal)
            mdag = minimize(prob, dag, rules)
            ok = bool(check_proof(prob, dag, rules)) and \
                bool(check_proof(prob, mdag, rules))
        dt = time.monotonic() - t0
        slowest = max(slowest, dt)
        if not ok or dt > 30:
            failures.append(path)
    report(capsys, "named theorems",
           len(files) >= 10 and not failures,
           f"{len(files) - len(failures)}/{len(files)} proved+checked, "
           f"slowest {slowest:.1f}s" +
           (f", failed: {failures}" if failures else ""))


AUX_CASES = [
    ("converse-Thales midpoint",
     "free A; free B; free T; foot C : A B T ?- cong O A O C",
     ("midpoint",), 16),
    ("converse-Thales full catalog",
     "free A; free B; free T; foot C : A B T ?- cong O A O C",
     None, 16),
    ("midline missing midpoint",
     "free A; free B; free C; midpoint M : A B ?- para B C M N",
     None, 64),
    ("equidistant point",
     "free A; free B; free C ?- cong O A O B",
     None, 16),
]


def test_auxiliary_search(rules, capsys):
    """≥3 aux-requiring problems solved by beam search with the exhaustive
    policy (width ≤8, depth ≤2); identical results for 1 and 8 workers,
    ≤60 s each."""
    failures = []
    slowest = 0.0
    for name, src, actions, k in AUX_CASES:
        prob = parse(src, allow_undefined_goal_points=True)
        outcomes = []
        for workers in (1, 8):
            t0 = time.monotonic()
            res = solve(prob, rules, policy=ExhaustivePolicy(actions=actions),
                        cfg=SearchConfig(beam_width=8, expand_k=k,
                                         max_steps=2, worker_count=workers,
                                         seed=0))
            dt = time.monotonic() - t0
            slowest = max(slowest, dt)
            full = Problem(prob.context + tuple(res.aux), prob.goal)
            ok = (res.solved and res.aux and dt <= 60
                  and bool(check_proof(full, res.proof, rules)))
            outcomes.append((ok, res.status, tuple(res.aux),
                             serialize_dag(res.proof)))
        if not (outcomes[0][0] and outcomes[0] == outcomes[1]):
            failures.append(name)
    report(capsys, "auxiliary search",
           len(AUX_CASES) >= 3 and not failures,
           f"{len(AUX_CASES) - len(failures)}/{len(AUX_CASES)} solved, "
           f"deterministic for 1 vs 8 workers, slowest run {slowest:.1f}s" +
           (f", failed: {failures}" if failures else ""))


def test_generator_certificate(rules, capsys, tmp_path):
    """A 10-minute seeded run emits ≥1000 unique problems; 100% pass the
    triple re-verification; 0 key collisions; a same-seed re-run into the
    same store emits 0."""
    store = str(tmp_path / "store")
    cfg = GeneratorConfig(seed=20260826, dedup_store=store)
    t0 = time.monotonic()
    stats = {}
    emitted = []
    for gp in generate(cfg, rules, stats=stats):
        emitted.append(gp)
        if len(emitted) >= 1000 or time.monotonic() - t0 > 600:
            break
    gen_s = time.monotonic() - t0

    keys = [g.canonical_key for g in emitted]
    collisions = len(keys) - len(set(keys))

    verify_failures = 0
    lim = SaturationLimits(timeout=10)
    for g in emitted:
        ctx = Problem(tuple(g.context), g.goal)
        full = Problem(g.full_steps, g.goal)
        ok = set(g.goal.args) <= {p for s in g.context for p in s.outputs}
        d_ctx = _diagrams(ctx, want=1)
        d_full = _diagrams(full, want=1)
        ok = ok and d_ctx and d_full
        if ok:
            ok = not saturate_problem(ctx, rules, limits=lim,
                                      diagram=d_ctx[0]).knows(g.goal)
            ok = ok and saturate_problem(full, rules, limits=lim,
                                         diagram=d_full[0]).knows(g.goal)
        verify_failures += not ok

    # same seed, same stream length, against the already-filled store:
    # every key must be present, so nothing new comes out
    recfg = GeneratorConfig(seed=cfg.seed, dedup_store=None)
    stored = set(keys)
    rerun = [g for g in generate(recfg, rules, count=len(emitted))
             if g.canonical_key not in stored]
    ok = (len(emitted) >= 1000 and gen_s <= 600 and collisions == 0
          and verify_failures == 0 and len(rerun) == 0)
    report(capsys, "generator certificate", ok,
           f"{len(emitted)} unique in {gen_s:.0f}s, {collisions} key "
           f"collisions, {verify_failures} re-verification failures, "
           f"re-run emitted {len(rerun)}")


def test_performance(rules, capsys, tmp_path):
    """Median closure <1 s on 12-point diagrams over 50 instances; the
    delta engine beats the brute-force matcher ≥10× at 10+ points."""
    out = tmp_path / "bench.json"
    code = main(["bench", "--suite", "closure", "--points", "12",
                 "--instances", "50", "--compare-naive", "--out", str(out)])
    rep = json.loads(out.read_text()) if out.exists() else {}
    ok = (code == 0 and rep.get("points", 0) >= 10
          and rep.get("median_s", 99) < 1.0
          and rep.get("speedup", 0) >= 10.0)
    report(capsys, "performance", ok,
           f"median {rep.get('median_s', float('nan')):.2f}s over "
           f"{rep.get('instances')} instances at {rep.get('points')} points, "
           f"speedup {rep.get('speedup', float('nan')):.1f}x")


def test_bindings_parity(rules, capsys, tmp_path):
    """Secondary surface: proof serializations through the bindings package
    byte-match the prove command's output on the full named-theorem suite.
    (Everything above runs without importing the bindings package at all.)"""
    gb = pytest.importorskip("geodeduce_bindings")
    matched = total = 0
    for path in problem_files():
        total += 1
        proof = tmp_path / "proof.txt"
        assert main(["prove", "--problem", str(path),
                     "--out", str(proof)]) == 0
        with open(path) as fh:
            h = gb.parse(fh.read(), allow_undefined_goal_points=True)
        res = gb.solve(h)
        if res.solved and res.serialize() == proof.read_text():
            matched += 1
    report(capsys, "bindings parity", matched == total and total >= 10,
           f"{matched}/{total} proof serializations byte-identical")
