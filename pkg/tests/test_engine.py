import json
from pathlib import Path

import pandas as pd
import pytest
import yaml

import run_experiment
from src.core.config import parse_experiment_config
from src.pipeline.engine import ExperimentEngine, cell_name, predicted_exponents, run_sweep, sweep_cells
from src.pipeline.validator import validate

SIMULATE = {
    "kind": "simulate",
    "sim": {"alpha": 1.0, "n": 64, "box_length": 32.0, "t_end": 0.0},
}
KERNEL = {
    "kind": "kernel-verify",
    "kernel": {"alphas": [2.0], "n": 128, "table_points": 5},
}


def _write(tmp_path, raw, name="exp.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return str(path)


def test_simulate_without_samples_passes(tmp_path):
    result = ExperimentEngine(parse_experiment_config(SIMULATE), str(tmp_path)).run()
    assert result.passed
    assert [v.name for v in result.verdicts] == ["mass", "nonnegativity"]
    assert "SKIPPED: linf_decay" in result.flags
    assert len(pd.read_csv(tmp_path / "decay.csv")) == 1
    assert validate(str(tmp_path))[0]


def test_too_short_a_run_fails_the_rate_checks(tmp_path):
    sim = {**SIMULATE["sim"], "n": 128, "t_end": 0.04, "sample_t0": 0.01, "samples_per_octave": 1}
    raw = {**SIMULATE, "sim": sim}
    result = ExperimentEngine(parse_experiment_config(raw), str(tmp_path)).run()
    assert not result.passed
    for name in ("linf_decay", "moment_growth", "sobolev_decay"):
        assert f"INSUFFICIENT_DATA: {name}" in result.flags
        assert f"SKIPPED: {name}" not in result.flags
    linf = next(v for v in result.verdicts if v.name == "linf_decay")
    assert not linf.passed
    assert run_experiment.main(["run", _write(tmp_path, raw), "--out", str(tmp_path / "cli")]) == 1


def test_solver_abort_gives_a_partial_report(tmp_path):
    raw = {**SIMULATE, "sim": {**SIMULATE["sim"], "t_end": 1.0, "dt": 1e4}}
    result = ExperimentEngine(parse_experiment_config(raw), str(tmp_path)).run()
    assert result.partial and not result.passed
    assert any(f.startswith("ABORTED") for f in result.flags)
    with open(tmp_path / "report.json", encoding="utf-8") as f:
        assert json.load(f)["partial"] is True
    assert validate(str(tmp_path))[0]


def test_kernel_verify_at_alpha_two(tmp_path):
    result = ExperimentEngine(parse_experiment_config(KERNEL), str(tmp_path)).run()
    assert result.passed, result.failures
    assert "kernel_closed_form" in [v.name for v in result.verdicts]
    table = pd.read_csv(tmp_path / "kernel_table_a2.csv")
    assert list(table.columns) == ["r", "value"]
    assert len(table) == 5


def test_zero_tolerance_fails(tmp_path):
    raw = {**KERNEL, "kernel": {**KERNEL["kernel"], "table": False}, "tolerances": {"kernel": 0.0}}
    result = ExperimentEngine(parse_experiment_config(raw), str(tmp_path)).run()
    assert not result.passed
    assert result.failures


def test_sweep_cells_and_names():
    cells = sweep_cells({"sim.alpha": [0.5, 1.0], "sim.n": [128, 256]})
    assert cells[1] == {"sim.alpha": 0.5, "sim.n": 256}
    assert len(cells) == 4
    assert cell_name(3, {"sim.alpha": 1.0, "sim.n": 256}) == "cell003_alpha1.0_n256"


def test_sweep_survives_a_failing_cell(tmp_path):
    raw = {**KERNEL, "kernel": {**KERNEL["kernel"], "table": False}, "sweep": {"kernel.n": [128, 48]}}
    sweep = run_sweep(parse_experiment_config(raw), str(tmp_path), jobs=1)
    assert [c["status"] for c in sweep.cells] == ["ok", "failed"]
    assert not sweep.passed
    frame = pd.read_csv(tmp_path / "sweep_aggregate.csv")
    assert set(frame["status"]) == {"ok", "failed"}
    assert "kernel.n" in frame.columns
    passed, messages = validate(str(tmp_path))
    assert not passed
    assert any("failed cells" in m for m in messages)


def test_predicted_exponents():
    assert predicted_exponents(1.0) == {"linf_decay": -2.0, "moment_growth": 0.5, "sobolev_decay": -3.5,
                                        "theorem1": 1.5}


def test_cli_exit_codes(tmp_path, capsys):
    out = str(tmp_path / "out")
    assert run_experiment.main(["run", _write(tmp_path, SIMULATE), "--out", out, "--format", "json"]) == 0
    assert (tmp_path / "out" / "report.json").exists()
    assert not (tmp_path / "out" / "decay.csv").exists()

    failing = {**KERNEL, "kernel": {**KERNEL["kernel"], "table": False}, "tolerances": {"kernel": 0.0}}
    assert run_experiment.main(["run", _write(tmp_path, failing, "fail.yaml"), "--out", out]) == 1

    bad = {**SIMULATE, "sim": {**SIMULATE["sim"], "alpha": 5.0}}
    assert run_experiment.main(["run", _write(tmp_path, bad, "bad.yaml")]) == 2
    assert "sim.alpha" in capsys.readouterr().err

    assert run_experiment.main(["sweep", _write(tmp_path, SIMULATE, "nosweep.yaml"), "--out", out]) == 2
    assert run_experiment.main(["run", str(tmp_path / "missing.yaml")]) == 2


@pytest.mark.slow
@pytest.mark.parametrize("name", [
    "config.yaml", "configs/kernel_verify.cfg", "configs/linear_lemma.cfg", "configs/linear_lemma_alpha05.cfg",
    "configs/linear_lemma_alpha1.cfg", "configs/duhamel_check.yaml", "configs/theorem1_alpha1.yaml",
    "configs/theorem1_alpha07.yaml",
])
def test_shipped_experiments_pass(tmp_path, name):
    path = Path(__file__).resolve().parent.parent / name
    assert run_experiment.main(["run", str(path), "--out", str(tmp_path)]) == 0
