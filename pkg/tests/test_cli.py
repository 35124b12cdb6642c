import json
import os
from pathlib import Path

import pytest

from crforge import cli
from crforge.models import _builtin_registry
from crforge.suite import CATALOGUE, SuiteConfig, build_report, parse_tolerances, run_suite, tolerance_for

GOLDEN = Path(__file__).parent / "golden"
GOLDEN_CASES = {
    "heisenberg3_all": ["--model", "heisenberg3", "--points", "2"],
    "cr_sphere_s3_frames": ["--model", "cr_sphere_s3", "--suite", "frames", "--points", "2"],
    "h3_to_c1_bochner": ["--model", "heisenberg3", "--map", "h3_to_c1", "--suite", "bochner", "--points", "2"],
    "heisenberg5_nonint_lifts": ["--model", "heisenberg5_nonint", "--suite", "lifts", "--points", "2"],
}

BROKEN_METRIC = """
[manifold]
name = "broken_metric"
kind = "hermitian"
coordinates = ["u", "v"]
basepoint = [0.5, 0.0]
box = [[-1.0, -0.2], [-0.5, 0.5]]
[frame]
vectors = [["1/2", "-i/2"]]
[metric]
matrix = [["u"]]
"""


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def strip_timestamp(text):
    report = json.loads(text)
    report.pop("timestamp")
    return report


def test_list_text_and_json(capsys):
    code, out, _ = run_cli(capsys, "list")
    assert code == 0
    for name in ("heisenberg3", "cr_sphere_s3", "euclidean_c1", "poincare_disc", "h3_to_c1"):
        assert name in out
    code, out, _ = run_cli(capsys, "list", "--json")
    rows = json.loads(out)
    assert code == 0 and isinstance(rows, list)
    assert {"name": "h3_to_c1", "category": "map", "source": "heisenberg3",
            "target": "euclidean_c1", "kind": "ph_to_hermitian"} in rows


def test_empty_user_dir_lists_builtins(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("CRFORGE_MODEL_PATH", str(tmp_path))
    code, out, _ = run_cli(capsys, "list", "--json")
    assert code == 0
    assert [r["name"] for r in json.loads(out)] == _builtin_registry().names()


def test_all_pass_exit_zero(capsys):
    code, out, _ = run_cli(capsys, "run", "--model", "heisenberg3", "--points", "1")
    assert code == 0
    assert "FAIL" not in out


def test_constructed_failure_exit_one(capsys):
    code, out, _ = run_cli(capsys, "run", "--model", "heisenberg5_nonint", "--points", "1", "--json")
    assert code == 1
    failed = {c["id"] for c in strip_timestamp(out)["checks"] if not c["pass"]}
    assert "integrability.nijenhuis" in failed


def test_zero_tolerance_fails_deterministically(capsys):
    args = ["run", "--model", "cr_sphere_s3", "--points", "1", "--tol", "*=0", "--json"]
    code1, out1, _ = run_cli(capsys, *args)
    code2, out2, _ = run_cli(capsys, *args)
    assert code1 == code2 == 1
    assert strip_timestamp(out1) == strip_timestamp(out2)
    rep = strip_timestamp(out1)
    assert all(c["pass"] == (c["max_residual"] == 0) for c in rep["checks"])


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--model", "nope"],
        ["run", "--model", "heisenberg3", "--points", "0"],
        ["run", "--model", "heisenberg3", "--tol", "frames.Gamma"],
        ["run", "--model", "heisenberg3", "--tol", "unknown.check=1"],
        ["run", "--model", "heisenberg3", "--tol", "*=-1"],
        ["run", "--model", "heisenberg3", "--map", "c1_to_h3"],
        ["run", "--model", "heisenberg3", "--map", "euclidean_c1"],
        ["run", "--model", "heisenberg3", "--order", "1"],
    ],
)
def test_bad_config_exit_two(capsys, argv):
    code, _, err = run_cli(capsys, *argv)
    assert code == 2
    assert err


@pytest.mark.parametrize("argv", [["run", "--suite", "everything", "--model", "heisenberg3"], ["run"]])
def test_usage_errors_exit_two(argv):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == 2


def test_evaluation_error_exit_three(capsys, tmp_path, monkeypatch):
    (tmp_path / "broken_metric.toml").write_text(BROKEN_METRIC)
    monkeypatch.setenv("CRFORGE_MODEL_PATH", str(tmp_path))
    code, out, err = run_cli(capsys, "run", "--model", "broken_metric", "--points", "2", "--json")
    assert code == 3
    payload = json.loads(out)
    assert payload["check"] in CATALOGUE
    assert payload["check"] in err


def test_explain(capsys):
    code, out, _ = run_cli(capsys, "explain", "frames.curvature_identity")
    assert code == 0
    assert "R_{i bar j k bar l}(p) = -conj(e_j) e_i g_{k bar l}(p)" in out
    code, out, _ = run_cli(capsys, "explain", "bochner.remainder_nonneg")
    assert code == 0 and "dropped term" in out
    code, _, err = run_cli(capsys, "explain", "nope")
    assert code == 2
    assert "frames.Gamma" in err


def test_determinism_byte_identical(capsys):
    args = ["run", "--model", "heisenberg3", "--map", "h3_to_c1", "--points", "2", "--seed", "7", "--json"]
    _, out1, _ = run_cli(capsys, *args)
    _, out2, _ = run_cli(capsys, *args)
    drop = lambda s: "\n".join(l for l in s.splitlines() if '"timestamp"' not in l)  # noqa: E731
    assert drop(out1) == drop(out2)
    assert json.loads(out1)["timestamp"]


def test_seed_changes_points():
    a = run_suite(SuiteConfig(model="cr_sphere_s3", suite="frames", points=1, seed=1))
    b = run_suite(SuiteConfig(model="cr_sphere_s3", suite="frames", points=1, seed=2))
    assert [c["max_residual"] for c in a["checks"]] != [c["max_residual"] for c in b["checks"]]


def test_tolerance_resolution():
    tols = parse_tolerances(["frames=1e-3", "frames.Gamma=0", "*=5"])
    assert tolerance_for("frames.Gamma", tols) == 0
    assert tolerance_for("frames.unitary", tols) == 1e-3
    assert tolerance_for("tw.nabla_J", tols) == 5
    assert tolerance_for("tw.nabla_J", {}) == CATALOGUE["tw.nabla_J"].tolerance


def test_report_pass_iff_within_tolerance():
    cfg = SuiteConfig(model="heisenberg3")
    rep = build_report(cfg, {"tw.nabla_J": [1e-12, 2e-9], "frames.Gamma": [0.0]})
    by_id = {c["id"]: c for c in rep["checks"]}
    assert not by_id["tw.nabla_J"]["pass"] and by_id["frames.Gamma"]["pass"]
    assert [c["id"] for c in rep["checks"]] == sorted(by_id)
    assert rep["summary"] == {"total": 2, "passed": 1, "failed": 1}


def test_catalogue_anchors_are_descriptive():
    for c in CATALOGUE.values():
        assert c.anchor and c.formula and c.tolerance > 0
        assert c.id.split(".")[0] in {"integrability", "tw", "chern", "calculus", "frames", "maps",
                                      "slit", "bochner", "lifts", "bundle"}


@pytest.mark.parametrize("case", sorted(GOLDEN_CASES))
def test_golden_reports(case, capsys):
    code, out, _ = run_cli(capsys, "run", *GOLDEN_CASES[case], "--json")
    report = strip_timestamp(out)
    path = GOLDEN / f"{case}.json"
    if os.environ.get("CRFORGE_REGEN_GOLDEN"):
        path.write_text(json.dumps(report, indent=2) + "\n")
    golden = json.loads(path.read_text())
    assert report["schema_version"] == golden["schema_version"]
    assert report["config"] == golden["config"]
    assert report["summary"] == golden["summary"]
    assert [(c["id"], c["anchor"], c["pass"], c["points"], c["tolerance"]) for c in report["checks"]] == [
        (c["id"], c["anchor"], c["pass"], c["points"], c["tolerance"]) for c in golden["checks"]
    ]
    for got, want in zip(report["checks"], golden["checks"]):
        assert got["max_residual"] == pytest.approx(want["max_residual"], rel=1e-6, abs=1e-12)


@pytest.mark.parametrize("row", [r for r in _builtin_registry().listing() if r["category"] == "map"], ids=lambda r: r["name"])
def test_every_shipped_map_runs(capsys, row):
    code, out, _ = run_cli(capsys, "run", "--model", row["source"], "--map", row["name"], "--points", "1", "--json")
    failed = {c["id"] for c in strip_timestamp(out)["checks"] if not c["pass"]}
    if row["name"] == "h3_to_c1_conj":
        assert code == 1 and "maps.commutation" in failed
    else:
        assert code == 0 and not failed
