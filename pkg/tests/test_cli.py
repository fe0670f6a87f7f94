import json
from pathlib import Path
from typing import Any

import pytest

from ldpcscale.cli import parse_floats, parse_range, run
from ldpcscale.core import ValidationError

REGULAR = ["--lambda", "3:1", "--rho", "6:1"]


def output(capsys: pytest.CaptureFixture[str]) -> Any:
    return json.loads(capsys.readouterr().out)


def test_threshold(capsys: pytest.CaptureFixture[str]) -> None:
    assert run(["threshold", *REGULAR]) == 0
    doc = output(capsys)
    assert doc["schema"] == 1
    assert doc["epsilon_star"] == pytest.approx(0.429439814419492, abs=1e-9)


def test_alpha(capsys: pytest.CaptureFixture[str]) -> None:
    assert run(["alpha", "--lambda", "2:0.5,3:0.5", "--rho", "6:1"]) == 0
    doc = output(capsys)
    assert doc["result"]["alpha"] == pytest.approx(0.623177952231572, abs=1e-7)
    assert doc["result"]["alpha_regular"] is None


def test_help_and_unknown_command(capsys: pytest.CaptureFixture[str]) -> None:
    assert run(["--help"]) == 0
    assert "simulate" in capsys.readouterr().out
    assert run([]) == 1
    assert run(["bogus", *REGULAR]) == 1
    assert "bogus" in capsys.readouterr().err


@pytest.mark.parametrize(
    "args",
    [
        ["threshold", "--lambda", "3:0.9", "--rho", "6:1"],
        ["threshold", "--lambda", "3:1"],
        ["threshold"],
        ["threshold", "--lambda", "3;1", "--rho", "6:1"],
        ["evolve", *REGULAR],
        ["evolve", *REGULAR, "--epsilon", "0.4"],
        ["evolve", *REGULAR, "--epsilon", "0.4", "--y-grid", "0.5", "--y-range", "0.1:1:3"],
        ["waterfall", *REGULAR, "--eps", "0.4"],
        ["simulate", *REGULAR, "--epsilon", "0.4"],
    ],
)
def test_invalid_input(args: list[str]) -> None:
    assert run(args) == 2


def test_unnormalized_ensemble_names_coefficients(capsys: pytest.CaptureFixture[str]) -> None:
    assert run(["threshold", "--lambda", "2:0.5,3:0.4", "--rho", "6:1"]) == 2
    assert "2:0.5,3:0.4" in capsys.readouterr().err


def test_numerical_failure(capsys: pytest.CaptureFixture[str]) -> None:
    assert run(["alpha", "--lambda", "2:1", "--rho", "4:1"]) == 3
    assert "Error" in capsys.readouterr().err


def test_verify(capsys: pytest.CaptureFixture[str]) -> None:
    args = ["verify", *REGULAR, "--epsilon", "0.4", "--y", "0.8,0.6"]
    assert run([*args, "--step", "1e-3"]) == 0
    doc = output(capsys)
    assert doc["passed"] is True
    assert len(doc["report"]["points"]) == 2
    assert run([*args, "--step", "1e-2", "--tolerance", "1e-15"]) == 4
    assert output(capsys)["passed"] is False


def test_evolve_csv(capsys: pytest.CaptureFixture[str]) -> None:
    args = ["evolve", *REGULAR, "--epsilon", "0.4", "--y-grid", "1.0,0.5", "--format", "csv"]
    assert run([*args, "--with-variance"]) == 0
    lines = capsys.readouterr().out.splitlines()
    header = lines[0].split(",")
    assert header == ["y", "tau", "x", "e", "r1_mean", "l3"] + [f"r{j}" for j in range(1, 7)] + [
        "delta_r1_r1"
    ]
    assert len(lines) == 3
    first = dict(zip(header, map(float, lines[1].split(","))))
    assert first["tau"] == 0.0
    assert first["r1"] == pytest.approx(0.031104, abs=1e-15)
    second = dict(zip(header, map(float, lines[2].split(","))))
    assert second["tau"] == pytest.approx(0.4 * 0.875 / 3, abs=1e-15)


def test_covariance_methods(capsys: pytest.CaptureFixture[str]) -> None:
    args = ["covariance", *REGULAR, "--epsilon", "0.4", "--y", "0.8"]
    assert run(args) == 0
    analytic = output(capsys)
    assert run([*args, "--method", "ode", "--step", "1e-3"]) == 0
    numeric = output(capsys)
    assert analytic["labels"] == numeric["labels"] == ["l3", "r1", "r2", "r3", "r4", "r5"]
    for a, b in zip(analytic["matrix"], numeric["matrix"]):
        assert a == pytest.approx(b, abs=1e-5)


def test_ensemble_file_and_out(tmp_path: Path) -> None:
    ens = tmp_path / "ens.toml"
    ens.write_text('n = 2048\n\n[lambda]\n3 = 1.0\n\n[rho]\n6 = 1.0\n')
    out = tmp_path / "waterfall.json"
    assert run(["waterfall", "--ensemble", str(ens), "--eps", "0.40,0.43", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["n"] == 2048
    assert [p["epsilon"] for p in doc["points"]] == [0.40, 0.43]
    assert doc["points"][0]["p_block"] < doc["points"][1]["p_block"]


def test_simulate(
    tmp_path: Path, capsys: pytest.CaptureFixture[str], monkeypatch: pytest.MonkeyPatch
) -> None:
    monkeypatch.setenv("LDPCSCALE_SIMULATE_TRIALS", "3")
    path = tmp_path / "trajectories.ndjson"
    args = ["simulate", *REGULAR, "--n", "600", "--epsilon", "0.3", "--tau-grid", "0.0,0.05"]
    assert run([*args, "--threads", "1", "--record-trajectories", str(path)]) == 0
    doc = output(capsys)
    assert doc["trials"] == 3
    assert doc["xi"] == 1800
    assert [p["tau"] for p in doc["points"]] == [0.0, 0.05]
    records = [json.loads(line) for line in path.read_text().splitlines()]
    assert [r["trial_id"] for r in records] == [0, 1, 2]
    assert all(r["schema"] == 1 for r in records)


def test_parse_helpers() -> None:
    assert parse_floats("0.1, 0.2", "y") == [0.1, 0.2]
    assert parse_range("0:1:3", "y") == [0.0, 0.5, 1.0]
    with pytest.raises(ValidationError):
        parse_floats("0.1,x", "y")
    with pytest.raises(ValidationError):
        parse_range("0:1", "y")
    with pytest.raises(ValidationError):
        parse_range("0:1:0", "y")
