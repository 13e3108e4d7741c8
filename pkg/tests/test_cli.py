import csv
import io
import json
import math
import shutil
import subprocess
import sys

import pytest

from poissoncert.cli import main


def run(*argv):
    buf = io.StringIO()
    try:
        code = main(list(argv), out=buf)
    except SystemExit as exc:
        code = exc.code
    return code, buf.getvalue()


def test_pmf_table():
    code, out = run("pmf", "--p", "0.1,0.2")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].split() == ["k", "w_k", "v_k", "delta"]
    assert len(lines) == 1 + 3 or (len(lines) == 2 + 3 and set(lines[1]) <= set("- "))


def test_pmf_csv_and_file(tmp_path):
    f = tmp_path / "inst.json"
    f.write_text('{"p": ["0.1", "0.2"]}')
    code, a = run("pmf", "--file", str(f), "--format", "csv")
    assert code == 0
    code, b = run("pmf", "--p", "0.1,0.2", "--format", "csv")
    assert a == b
    rows = list(csv.DictReader(io.StringIO(a)))
    assert [float(r["w_k"]) for r in rows] == pytest.approx([0.72, 0.26, 0.02], abs=1e-15)


def test_input_errors():
    assert run("pmf", "--p", "1.5")[0] == 1
    assert run("pmf", "--p", "abc")[0] == 1
    assert run("pmf")[0] == 1
    assert run("pmf", "--p", "0.1", "--file", "x.json")[0] == 1
    assert run("pmf", "--file", "/nonexistent/x.json")[0] == 1
    assert run("frobnicate")[0] == 1
    assert run("pmf", "--p", "0.1", "--format", "xml")[0] == 1


def test_distances_examples():
    code, out = run("distances", "--p", "0.1", "--format", "json")
    assert code == 0
    d = json.loads(out)
    assert d["kl"] == pytest.approx(0.0051755, abs=1e-7)
    assert d["chi2"] == pytest.approx(0.0057055, abs=1e-7)
    assert d["tv"] == pytest.approx(2 * 0.1 * (1 - math.exp(-0.1)), abs=1e-15)
    code, out = run("distances", "--p", "0,0", "--format", "json")
    d = json.loads(out)
    assert all(d[k] == 0 for k in ("tv", "kl", "chi2", "kolmogorov", "sup_density"))
    code, out = run("distances", "--p", "0.5", "--format", "json")
    assert isinstance(json.loads(out), dict)


def test_stats_and_delta():
    code, out = run("stats", "--p", "0.1,0.2", "--format", "json")
    d = json.loads(out)
    assert d["lam"] == pytest.approx(0.3) and d["S"] == pytest.approx(0.028504066972, abs=1e-11)
    code, out = run("stats", "--p", "1.0,0.2", "--format", "json")
    assert code == 0 and json.loads(out)["S"] is None
    code, out = run("delta", "--p", "0.3", "--k-max", "2", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert float(rows[1]["delta"]) == pytest.approx(0.0777545, abs=1e-7)


def test_bounds_examples():
    code, out = run("bounds", "--p", "0.3", "--ids", "LE_CAM,HJK_LOWER", "--format", "jsonl")
    assert code == 0
    recs = [json.loads(l) for l in out.splitlines()]
    assert [r["id"] for r in recs] == ["HJK_LOWER", "LE_CAM"]
    assert all(r["margin"] > 0 for r in recs)
    code, out = run("bounds", "--p", "0.5,0.5", "--ids", "PROP62", "--kappa", "0.5", "--format", "json")
    (rec,) = json.loads(out)
    assert rec["applicable"] is True and rec["margin"] > 0


def test_bounds_unknown_id_lists_valid(capsys):
    code, _ = run("bounds", "--p", "0.3", "--ids", "BOGUS")
    assert code == 1
    assert "LE_CAM" in capsys.readouterr().err


def test_bounds_single_k_and_table():
    code, out = run("bounds", "--p", "0.2,0.3", "--ids", "THM13_UNIF,LE_CAM", "--k", "1")
    assert code == 0
    body = [l for l in out.splitlines()[1:] if l.strip() and not set(l) <= set("- ")]
    assert len(body) == 2


def test_bounds_violation_exit_code():
    # the HR upper endpoint fails here but is reported-only, so it must not trigger exit 2
    code, out = run("bounds", "--p", ",".join(["0.01"] * 100), "--ids", "HR_IID_UPPER",
                    "--format", "json")
    assert code == 0
    (rec,) = json.loads(out)
    assert rec["margin"] < 0


def test_verify_small(tmp_path):
    out_file = tmp_path / "rep.jsonl"
    code, _ = run("verify", "--per-kind", "3", "--seed", "5", "--format", "jsonl",
                  "--output", str(out_file))
    assert code == 0
    recs = [json.loads(l) for l in out_file.read_text().splitlines()]
    assert recs and all(r["record"] != "violation" for r in recs)


def test_verify_corpus_file(tmp_path):
    cfg = tmp_path / "corpus.json"
    cfg.write_text(json.dumps({"regimes": [{"kind": "iid", "n": 50, "lam": 1.0},
                                           {"kind": "sqrt_decay", "n": 30}]}))
    code, out = run("verify", "--corpus", str(cfg), "--format", "json")
    assert code == 0
    assert json.loads(out)["n_instances"] == 2


def test_verify_env_seed(monkeypatch):
    monkeypatch.setenv("POISSONCERT_SEED", "11")
    a = run("verify", "--per-kind", "2", "--format", "csv")
    b = run("verify", "--per-kind", "2", "--seed", "11", "--format", "csv")
    assert a == b
    monkeypatch.setenv("POISSONCERT_SEED", "eleven")
    assert run("verify", "--per-kind", "1")[0] == 1


def test_sweeps():
    code, out = run("sweep", "iid-rate", "--lambda", "1", "--n", "50,100,200,400")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [int(r["n"]) for r in rows] == [50, 100, 200, 400]
    code, out = run("sweep", "normal-comparison", "--n", "16,64,256,1024,4096")
    assert code == 0
    header = out.splitlines()[0].split(",")
    assert {"M_scaled", "bound_vs_normal", "thm71_simple", "inv_sqrt_lam"} <= set(header)


def test_contour_check():
    code, out = run("contour-check", "--p", "0.1,0.2,0.3", "--r", "0.5", "--format", "json")
    assert code == 0 and json.loads(out)["agree"] is True
    code, out = run("contour-check", "--p", ",".join(["0.3"] * 40), "--r", "0.05",
                    "--precision", "double", "--format", "json")
    assert code == 3
    assert run("contour-check", "--p", "0.1,0.2", "--m", "2")[0] == 1


def test_byte_identical_output():
    for argv in (("distances", "--p", "0.1,0.35,0.2", "--format", "csv"),
                 ("bounds", "--p", "0.1,0.35,0.2", "--format", "jsonl"),
                 ("sweep", "iid-rate", "--n", "50,100")):
        assert run(*argv) == run(*argv)


def test_console_script_entry_point():
    exe = shutil.which("poissoncert")
    cmd = [exe] if exe else [sys.executable, "-m", "poissoncert.cli"]
    res = subprocess.run(cmd + ["distances", "--p", "0.1", "--format", "json"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["kl"] == pytest.approx(0.0051755, abs=1e-7)
    res = subprocess.run(cmd + ["pmf", "--p", "2"], capture_output=True, text=True)
    assert res.returncode == 1
