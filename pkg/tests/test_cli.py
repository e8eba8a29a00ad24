from __future__ import annotations

import io
import json

import numpy as np
import pytest

from fermi_definetti.cli import EXIT_BUDGET, EXIT_FAIL, EXIT_INPUT, EXIT_OK, RunConfig, main
from fermi_definetti.graded import algebra_to_json, preset
from fermi_definetti.serialize import encode_complex


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), stdout=out)
    return code, out.getvalue()


@pytest.fixture
def state_files(tmp_path):
    paths = {}
    for name, argv in {
        "product": ["product", "--sites", "4", "--t", "0.3"],
        "mixture": ["mixture", "--sites", "3", "--t", "0.2", "0.9", "--weights", "0.3", "0.7"],
        "mixture4": ["mixture", "--sites", "4", "--t", "0.2", "0.9", "--weights", "0.3", "0.7"],
        "skew": ["product", "--sites", "2", "--t", "0.1", "0.8"],
    }.items():
        path = tmp_path / f"{name}.json"
        assert run("state", *argv, "--out", str(path))[0] == EXIT_OK
        paths[name] = str(path)
    return paths


def test_algebra_preset_and_info():
    code, text = run("algebra", "preset", "car(1)")
    data = json.loads(text)
    assert code == EXIT_OK
    assert len(data["basis"]) == 4
    assert sum(b["grade"] == -1 for b in data["basis"]) == 2
    code, text = run("algebra", "info", "car(2)")
    info = json.loads(text)
    assert (info["ambient_dim"], info["basis_size"]) == (4, 16)


def test_algebra_validate(tmp_path):
    good = tmp_path / "good.json"
    good.write_text(json.dumps(algebra_to_json(preset("c2_swap"))))
    assert run("algebra", "validate", "--spec", str(good))[0] == EXIT_OK
    bad = algebra_to_json(preset("car(1)"))
    bad["grading_unitary"] = encode_complex(np.diag([1.0, 2.0]))
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    code, text = run("algebra", "validate", str(path))
    assert code == EXIT_FAIL
    assert json.loads(text)["errors"][0]["type"] == "GradingNotInvolutive"


def test_input_errors(tmp_path):
    assert run("algebra", "info")[0] == EXIT_INPUT
    assert run("algebra", "info", "car(7)")[0] == EXIT_INPUT
    assert run("bogus")[0] == EXIT_INPUT
    assert run("decompose", "--state", str(tmp_path / "missing.json"))[0] == EXIT_INPUT
    assert run("verify", "signs", "--tol", "-1")[0] == EXIT_INPUT
    assert run("verify", "signs", "--max-sites", "1")[0] == EXIT_INPUT


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(seed=0, tol=0.0)


def test_verify_klein():
    code, text = run("verify", "klein", "--seed", "7", "--draws", "50")
    data = json.loads(text)
    assert code == EXIT_OK and data["passed"]
    assert max(p["worst_residual"] for p in data["suites"]["klein"]) < 1e-12


def test_verify_is_deterministic():
    a = run("verify", "action", "--seed", "3", "--draws", "20")
    b = run("verify", "action", "--seed", "3", "--draws", "20")
    assert a == b and a[0] == EXIT_OK


def test_verify_csv():
    code, text = run("verify", "signs", "--draws", "5", "--format", "csv")
    lines = text.strip().splitlines()
    assert code == EXIT_OK
    assert lines[0] == "suite,property,passed,worst_residual,threshold"
    assert len(lines) == 13


def test_decompose_mixture(state_files, tmp_path):
    out = tmp_path / "fit.json"
    code, _ = run("decompose", "--state", state_files["mixture"], "--grid", "101", "--out", str(out))
    assert code == EXIT_OK
    fit = json.loads(out.read_text())
    w = dict(zip(fit["grid_params"], fit["weights"]))
    assert w[0.2] == pytest.approx(0.3, abs=1e-6)
    assert w[0.9] == pytest.approx(0.7, abs=1e-6)
    assert fit["residual"] <= 1e-8 and fit["sites"] == 3


def test_decompose_product_and_restriction(state_files):
    code, text = run("decompose", "--state", state_files["product"], "--grid", "11", "--sites", "3")
    fit = json.loads(text)
    assert code == EXIT_OK and fit["sites"] == 3
    assert max(fit["weights"]) == pytest.approx(1.0, abs=1e-8)


def test_decompose_non_symmetric(state_files):
    assert run("decompose", "--state", state_files["skew"])[0] == EXIT_INPUT


def test_cluster_modes(state_files):
    code, text = run("cluster", "strong", "--state", state_files["product"], "--a", "e12", "--b", "e21")
    assert code == EXIT_OK and max(v for _, v in json.loads(text)["points"]) <= 1e-12
    code, text = run("cluster", "strong", "--state", state_files["mixture4"], "--format", "csv")
    gap = 0.3 * 0.04 + 0.7 * 0.81 - 0.69**2
    rows = [line.split(",") for line in text.strip().splitlines()[1:]]
    assert all(float(v) == pytest.approx(gap, abs=1e-10) for _, v in rows)
    code, text = run("cluster", "weak", "--state", state_files["product"], "--a", "unit")
    assert max(v for _, v in json.loads(text)["points"]) <= 1e-12
    code, text = run("cluster", "abelian", "--state", state_files["product"],
                     "--a", "e12", "--b", "e21")
    assert code == EXIT_OK and json.loads(text)["passed"]


def test_cluster_budget(tmp_path):
    path = tmp_path / "one.json"
    assert run("state", "product", "--sites", "1", "--out", str(path))[0] == EXIT_OK
    assert run("cluster", "strong", "--state", str(path))[0] == EXIT_BUDGET


def test_density_state_file(tmp_path):
    path = tmp_path / "rho.json"
    path.write_text(json.dumps({"algebra": "car(1)", "sites": 2,
                                "density": encode_complex(np.eye(4) / 4)}))
    code, text = run("decompose", "--state", str(path), "--grid", "3")
    assert code == EXIT_OK
    assert json.loads(text)["weights"][1] == pytest.approx(1.0, abs=1e-8)
