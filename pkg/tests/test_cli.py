import io
import json
import subprocess
import sys

import numpy as np
import pytest

from hcnet.cli import dumps, run
from hcnet.network import dumps_network, load_builtin


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run([str(a) for a in argv], out=out, err=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def diamond_file(tmp_path):
    path = tmp_path / "diamond.json"
    path.write_text(dumps_network(load_builtin("diamond")))
    return path


def test_analyze_diamond(diamond_file):
    code, out, _ = call("analyze", diamond_file)
    assert code == 0
    rep = json.loads(out)
    assert rep["asymmetric"] is False
    (k,) = rep["invariant_quadratics"]
    assert k["alpha"] == pytest.approx(3.0)
    assert np.allclose(k["z"], np.array([0, 1, 0, -1]) / np.sqrt(2))


def test_stationary_single():
    code, out, _ = call("stationary", "single")
    assert code == 0
    rep = json.loads(out)
    assert np.allclose(rep["Q"], np.eye(2), atol=1e-12) and rep["rank"] == 2


def test_stationary_refuses_symmetric_with_explanation():
    code, out, err = call("stationary", "diamond")
    assert code == 3
    assert "not asymmetric" in err and "<z,q>^2" in err
    assert json.loads(out)["invariant_quadratics"][0]["alpha"] == pytest.approx(3.0)


def test_tilt():
    code, out, _ = call("tilt", "diamond", "--gamma", "10")
    assert code == 0
    rep = json.loads(out)
    assert rep["residual"] <= 1e-8
    assert np.array(rep["Q"]).shape == (8, 8)


def test_tilt_on_asymmetric_is_precondition_error():
    assert call("tilt", "chain3", "--gamma", "1")[0] == 3


def test_simulate_is_byte_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["chain3", "--t", "20", "--dt", "1e-3", "--seed", "7"]
    assert call("simulate", *args, "--out", a)[0] == 0
    assert call("simulate", *args, "--out", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "t,q1,q2,q3,p1,p2,p3"
    assert len(lines) == 20001 + 1
    assert all(len(line.split(",")) == 1 + 2 * 3 for line in lines)


def test_simulate_stdout_and_ledger(tmp_path):
    code, out, _ = call("simulate", "single", "--t", "0.05", "--dt", "0.01", "--seed", "1")
    assert code == 0 and out.startswith("t,q1,p1\n") and len(out.splitlines()) == 7
    code, out, _ = call("simulate", "single", "--t", "1", "--dt", "0.01", "--out", tmp_path / "x.csv")
    led = json.loads(out)["ledger"]
    assert set(led) >= {"H_start", "H_end", "bath_input", "dissipation", "martingale_residual"}


def test_simulate_paths(tmp_path):
    code, out, _ = call(
        "simulate", "single", "--t", "1", "--dt", "0.01", "--paths", "3", "--out", tmp_path / "run.csv"
    )
    assert code == 0
    rep = json.loads(out)
    assert len(rep["csv"]) == 3 and len(rep["ledgers"]) == 3
    texts = [open(p).read() for p in rep["csv"]]
    assert len(set(texts)) == 3
    # path k is the same whether run alone or in an ensemble
    code, single, _ = call("simulate", "single", "--t", "1", "--dt", "0.01")
    assert single == texts[0]


def test_simulate_exact_gaussian_rejects_anharmonic():
    assert call("simulate", "quartic_chain", "--t", "1", "--dt", "0.1", "--scheme", "exact-gaussian")[0] == 3


def test_simulate_divergence_is_numerical_failure():
    code, _, err = call("simulate", "quartic_chain", "--t", "10", "--dt", "0.5", "--z0", "10,-10,10,0,0,0")
    assert code == 2 and "diverged" in err


def test_lasalle_and_rigidity():
    code, out, _ = call("lasalle", "diamond")
    assert code == 0 and json.loads(out)["verdict"] == "stability refuted"
    code, out, _ = call("rigidity", "quartic_chain", "--samples", "3", "--T", "10")
    rep = json.loads(out)
    assert code == 0 and rep["passed"] and rep["limit"]["includes_pinning"] is False


def test_rigidity_precondition(tmp_path):
    doc = json.loads(dumps_network(load_builtin("quartic_chain")))
    doc["pinning"], doc["interaction"] = doc["interaction"], doc["pinning"]
    path = tmp_path / "weak.json"
    path.write_text(json.dumps(doc))
    code, _, err = call("rigidity", path, "--samples", "1")
    assert code == 3 and "u=2, v=4" in err


def test_hormander():
    code, out, _ = call("hormander", "star_quartic", "--point", "0.5,0.5,0.5,0.1,0.3,0.3")
    rep = json.loads(out)
    assert code == 0 and rep["rank"] == 4 and rep["full"] is False
    code, out, _ = call("hormander", "chain3", "--point", "1,2,3,4,5,6", "--depth", "1")
    assert json.loads(out)["rank"] == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["analyze", "no_such_network"],
        ["tilt", "diamond"],
        ["tilt", "diamond", "--gamma", "-1"],
        ["simulate", "chain3", "--t", "1", "--dt", "0"],
        ["simulate", "chain3", "--t", "1", "--dt", "0.1", "--scheme", "milstein"],
        ["hormander", "chain3", "--point", "1,2"],
        ["hormander", "chain3", "--point", "a,b"],
        ["frobnicate", "chain3"],
        [],
    ],
)
def test_invalid_flags_exit_1(argv):
    code, _, err = call(*argv)
    assert code == 1 and err


def test_invalid_spec_exit_1_names_violation(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 3, "edges": [[1, 2]], "damped": [1], "boundary": [1], "temperatures": {"1": 1}, "harmonic": true}')
    code, _, err = call("analyze", bad)
    assert code == 1 and "disconnected" in err
    bad.write_text('{"n": 3,')
    code, _, err = call("analyze", bad)
    assert code == 1 and "line" in err


def test_rank_eps_env(monkeypatch):
    monkeypatch.setenv("HCN_RANK_EPS", "not-a-number")
    code, _, err = call("analyze", "chain3")
    assert code == 1 and "HCN_RANK_EPS" in err
    monkeypatch.setenv("HCN_RANK_EPS", "1e-3")
    code, out, _ = call("stationary", "six_particles")
    assert code == 0 and json.loads(out)["rank_eps"] == 1e-3


def test_dumps_seventeen_digits():
    text = dumps({"x": 0.1, "y": [1.0 / 3.0], "n": 2, "b": True, "nan": float("nan")})
    d = json.loads(text)
    assert '"x": 0.10000000000000001' in text
    assert d["y"][0] == 1.0 / 3.0 and d["n"] == 2 and d["b"] is True and d["nan"] is None


def test_console_script_runs():
    res = subprocess.run(
        [sys.executable, "-m", "hcnet.cli", "analyze", "single"], capture_output=True, text=True, check=False
    )
    assert res.returncode == 0 and json.loads(res.stdout)["asymmetric"] is True
