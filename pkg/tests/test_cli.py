import json
from pathlib import Path

import pytest

from catlplus.cli import main
from catlplus.scenario import save_config


@pytest.fixture()
def toy_file(tmp_path, fast_toy_config) -> Path:
    path = tmp_path / "toy.json"
    path.write_text(save_config(fast_toy_config))
    return path


def test_synth_writes_outputs_and_exits_zero(toy_file, tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["synth", str(toy_file), "--out", str(out), "--seed", "2"])
    assert code == 0
    for name in ("trajectories.csv", "controls.csv", "summary.txt", "plot.svg"):
        assert (out / name).exists()
    printed = capsys.readouterr().out
    assert "satisfied: True" in printed
    summary = (out / "summary.txt").read_text()
    assert "objective:" in summary and "seed: 2" in summary


def test_synth_outputs_are_reproducible(toy_file, tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["synth", str(toy_file), "--out", str(out_a), "--seed", "4"]) == 0
    assert main(["synth", str(toy_file), "--out", str(out_b), "--seed", "4"]) == 0
    for name in ("trajectories.csv", "controls.csv", "plot.svg"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
    # the summary records wall-clock phase timings; everything else matches
    for a_line, b_line in zip(
        (out_a / "summary.txt").read_text().splitlines(),
        (out_b / "summary.txt").read_text().splitlines(),
    ):
        if not a_line.endswith("_seconds") and "_seconds:" not in a_line:
            assert a_line == b_line


def test_check_satisfied_and_violating(toy_file, tmp_path, capsys):
    out = tmp_path / "run"
    main(["synth", str(toy_file), "--out", str(out), "--seed", "2"])
    assert main(["check", str(toy_file), str(out / "trajectories.csv")]) == 0
    assert "satisfied: True" in capsys.readouterr().out

    rows = ["t,agent,x,y"]
    for t in range(11):
        rows.append(f"{t},0,0.1,0.1")
        rows.append(f"{t},1,0.2,0.2")
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(rows))
    assert main(["check", str(toy_file), str(bad)]) == 1
    printed = capsys.readouterr().out
    assert "satisfied: False" in printed
    assert "VIOLATED" in printed


def test_check_short_trace_is_an_error(toy_file, tmp_path, capsys):
    short = tmp_path / "short.csv"
    short.write_text("t,agent,x,y\n0,0,0.0,0.0\n0,1,0.0,0.0")
    assert main(["check", str(toy_file), str(short)]) == 2
    assert "horizon" in capsys.readouterr().err


def test_gradcheck_exit_code(toy_file, capsys):
    assert main(["gradcheck", str(toy_file), "--seed", "6"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_scale_prints_table(toy_file, tmp_path, capsys):
    out = tmp_path / "scaled"
    code = main(
        [
            "scale", str(toy_file),
            "--multipliers", "1,2",
            "--reps", "1",
            "--generations", "4",
            "--pop", "8",
            "--out", str(out),
        ]
    )
    assert code == 0
    printed = capsys.readouterr().out
    assert printed.splitlines()[0].startswith("agents,decision_dim")
    assert (out / "scale.csv").exists()


def test_invalid_scenario_exits_two(tmp_path, toy_file, capsys):
    payload = json.loads(toy_file.read_text())
    payload["formula"] = "<in(Nowhere), Delivery, 1>"
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(payload))
    assert main(["check", str(broken), str(toy_file)]) == 2
    assert "Nowhere" in capsys.readouterr().err


def test_missing_file_exits_two(capsys):
    assert main(["gradcheck", "does-not-exist.json"]) == 2
    assert "error" in capsys.readouterr().err


def test_unsatisfied_synth_exits_one(tmp_path, fast_toy_config):
    impossible = fast_toy_config.model_copy(deep=True)
    impossible.formula = "<in(Goal), Delivery, 2> && !<in(Goal), Delivery, 1>"
    impossible.synthesis.cmaes.generations = 4
    path = tmp_path / "impossible.json"
    path.write_text(save_config(impossible))
    assert main(["synth", str(path), "--out", str(tmp_path / "o")]) == 1
