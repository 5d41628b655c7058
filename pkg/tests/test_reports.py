import json
import math

import numpy as np
import pandas as pd
import pytest

from src.models.datatypes import (
    DECAY_COLUMNS, DecayReport, DecaySample, EnsembleResult, ExperimentResult, Verdict,
)
from src.pipeline.reports import (
    AGGREGATE_COLUMNS, VERDICT_COLUMNS, aggregate_frame, jsonable, write_aggregate, write_experiment_report,
)


def _result():
    report = DecayReport(alpha=1.0, samples=[
        DecaySample(0.0, 1.0, 2.0, 1.5, 3.0, 0.1, 0.0, 0.0, 32.0),
        DecaySample(0.5, 1.0, 1.0, 1.2, 0.4, 0.2, 0.01, 1e-20, 32.0, ("UNDER_RESOLVED",)),
    ])
    verdicts = [Verdict("mass", True, 0.0, 0.0, 1e-11), Verdict("linf_decay", False, float("nan"), -2.0, 0.2, "x")]
    ensemble = EnsembleResult("hls", {"sigma": 1.0, "n": 64}, [0, 1, 2], [0.5, 0.25, 0.125], {"max": 0.5})
    return ExperimentResult(kind="simulate", verdicts=verdicts, report=report, ensembles=[ensemble],
                            tables={"kernel_table_a1": pd.DataFrame({"r": [0.0], "value": [0.1]})})


def test_files_and_columns(tmp_path):
    written = write_experiment_report(_result(), str(tmp_path), ("csv", "json"), {"kind": "simulate"}, 3)
    names = [p.split("/")[-1] for p in written]
    assert names == ["decay.csv", "verdicts.csv", "ensemble_hls_n64.csv", "kernel_table_a1.csv",
                     "report.json", "ensemble_summary.json"]
    assert list(pd.read_csv(tmp_path / "decay.csv").columns) == DECAY_COLUMNS
    assert list(pd.read_csv(tmp_path / "verdicts.csv").columns) == VERDICT_COLUMNS
    assert pd.read_csv(tmp_path / "ensemble_hls_n64.csv")["member_id"].tolist() == [0, 1, 2]


def test_report_json_is_strict(tmp_path):
    write_experiment_report(_result(), str(tmp_path), ("json",), {"kind": "simulate"}, 3)
    with open(tmp_path / "report.json", encoding="utf-8") as f:
        payload = json.load(f)
    assert payload["seed"] == 3
    assert payload["passed"] is False
    assert payload["verdicts"][1]["measured"] == "nan"
    assert payload["decay"]["columns"] == DECAY_COLUMNS
    assert payload["decay"]["samples"][1]["flags"] == ["UNDER_RESOLVED"]
    assert not (tmp_path / "decay.csv").exists()


def test_reports_are_byte_identical(tmp_path):
    for name in ("a", "b"):
        write_experiment_report(_result(), str(tmp_path / name), ("csv", "json"), {"kind": "simulate"}, 3)
    for path in sorted((tmp_path / "a").iterdir()):
        assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes()


def test_floats_round_trip_through_csv(tmp_path):
    write_experiment_report(_result(), str(tmp_path), ("csv",))
    assert pd.read_csv(tmp_path / "decay.csv")["contamination"].iloc[1] == pytest.approx(1e-20, rel=1e-15)


def test_jsonable():
    assert jsonable({"a": (np.float64(1.5), np.int64(2), np.bool_(True)), 3: -math.inf}) == \
        {"a": [1.5, 2, True], "3": "-inf"}


def _row(cell, n, measured, status="ok"):
    return {"cell": cell, "status": status, "check": "linf_decay", "measured": measured, "predicted": -2.0,
            "tolerance": 0.2, "passed": True, "error": "", "sim.alpha": 1.0, "sim.n": n}


def test_aggregate_columns_and_refinement():
    rows = [_row("c0", 128, -2.0), _row("c1", 256, -2.1)]
    frame = aggregate_frame(rows, ["sim.alpha", "sim.n"])
    assert list(frame.columns) == ["cell", "sim.alpha", "sim.n"] + AGGREGATE_COLUMNS[1:]
    assert math.isnan(frame["refinement_delta"].iloc[0])
    assert frame["refinement_delta"].iloc[1] == pytest.approx(0.05)


def test_aggregate_keeps_failed_cells(tmp_path):
    rows = [_row("c0", 128, -2.0), {"cell": "c1", "status": "failed", "error": "boom", "sim.alpha": 1.0,
                                     "sim.n": 256}]
    frame = aggregate_frame(rows, ["sim.alpha", "sim.n"])
    assert frame["refinement_delta"].isna().all()
    write_aggregate(frame, str(tmp_path))
    back = pd.read_csv(tmp_path / "sweep_aggregate.csv")
    assert back["status"].tolist() == ["ok", "failed"]
    with open(tmp_path / "sweep_aggregate.json", encoding="utf-8") as f:
        records = json.load(f)
    assert records[1]["measured"] is None
