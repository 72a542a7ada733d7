"""Command-line interface: subcommands, exit codes, config precedence."""
import json
import os

import pytest

from geodeduce.cli import main

from conftest import PROBLEM_DIR

MIDLINE = os.path.join(PROBLEM_DIR, "midline.geo")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_prove_and_check_roundtrip(tmp_path, capsys):
    proof = tmp_path / "midline.proof"
    code, out, err = run(capsys, "prove", "--problem", MIDLINE,
                         "--policy", "none", "--out", str(proof))
    assert code == 0
    assert "status: solved" in out
    assert "aux: 0" in out
    code, out, _ = run(capsys, "check", "--proof", str(proof),
                       "--problem", MIDLINE)
    assert code == 0 and "ok" in out


def test_prove_with_aux_search(tmp_path, capsys):
    prob = tmp_path / "aux.geo"
    prob.write_text("free A; free B; free T; foot C : A B T ?- cong O A O C\n")
    proof = tmp_path / "aux.proof"
    code, out, _ = run(capsys, "prove", "--problem", str(prob),
                       "--policy", "exhaustive", "--beam-width", "8",
                       "--expand-k", "16", "--max-steps", "2",
                       "--out", str(proof))
    assert code == 0
    assert "aux: 1" in out
    assert any(ln.startswith("aux ") for ln in proof.read_text().splitlines())
    code, out, _ = run(capsys, "check", "--proof", str(proof),
                       "--problem", str(prob))
    assert code == 0 and "ok" in out


def test_prove_unsolved_exit_2(tmp_path, capsys):
    prob = tmp_path / "hard.geo"
    prob.write_text("free A; free B; free C ?- cong A B A C\n")
    code, out, _ = run(capsys, "prove", "--problem", str(prob),
                       "--policy", "none")
    assert code == 2
    assert "status:" in out


def test_check_rejects_corrupted_proof(tmp_path, capsys):
    proof = tmp_path / "p.proof"
    code, _, _ = run(capsys, "prove", "--problem", MIDLINE,
                     "--policy", "none", "--out", str(proof))
    assert code == 0
    text = proof.read_text().replace(" by r", " by q")
    proof.write_text(text)
    code, _, err = run(capsys, "check", "--proof", str(proof),
                       "--problem", MIDLINE)
    assert code == 2
    assert err.strip()


def test_parse_error_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.geo"
    bad.write_text("free A; snorkel B : A ?- coll A B B\n")
    code, _, err = run(capsys, "prove", "--problem", str(bad))
    assert code == 1
    assert "error:" in err


def test_missing_file_exit_1(capsys):
    code, _, err = run(capsys, "check", "--proof", "/nonexistent",
                       "--problem", MIDLINE)
    assert code == 1


def test_generate_deterministic_output(tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for out in (a, b):
        code, _, err = run(capsys, "generate", "--count", "3",
                           "--seed", "5", "--out", str(out))
        assert code == 0
        assert "3 new" in err
    assert a.read_text() == b.read_text()
    assert a.read_text().count("?-") == 3


def test_generate_store_rerun_emits_zero(tmp_path, capsys):
    store = tmp_path / "store"
    out1 = tmp_path / "one.txt"
    code, _, err = run(capsys, "generate", "--count", "3", "--seed", "5",
                       "--store", str(store), "--out", str(out1))
    assert code == 0 and "3 new" in err
    out2 = tmp_path / "two.txt"
    code, _, err = run(capsys, "generate", "--count", "3", "--seed", "5",
                       "--store", str(store), "--out", str(out2))
    assert code == 0
    assert "0 new" in err
    assert out2.read_text() == ""


def test_config_file_and_env_precedence(tmp_path, capsys, monkeypatch):
    cfgfile = tmp_path / "geo.cfg"
    cfgfile.write_text("seed=9\ncount=2\n")
    out = tmp_path / "o.txt"
    # config file supplies count; env overrides seed; flag overrides count
    monkeypatch.setenv("GEODEDUCE_SEED", "5")
    code, _, err = run(capsys, "generate", "--config", str(cfgfile),
                       "--count", "3", "--out", str(out))
    assert code == 0
    assert "config: generate.seed=5" in err
    assert "config: generate.count=3" in err
    ref = tmp_path / "ref.txt"
    run(capsys, "generate", "--count", "3", "--seed", "5", "--out", str(ref))
    assert out.read_text() == ref.read_text()


def test_bench_unknown_suite_exit_1(capsys):
    code, _, _ = run(capsys, "bench", "--suite", "nope")
    assert code == 1


def test_bench_small(capsys):
    code, out, _ = run(capsys, "bench", "--suite", "closure",
                       "--instances", "3", "--points", "8")
    assert code == 0
    rep = json.loads(out)
    assert rep["instances"] == 3
    assert rep["median_s"] > 0
