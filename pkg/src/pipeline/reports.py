"""Report writers: decay CSV, report.json, ensemble tables and the sweep aggregate.

Every writer is deterministic: same result in, byte-identical files out.
Floats are written with 17 significant digits; non-finite floats become the
strings ``"inf"``, ``"-inf"`` and ``"nan"`` in JSON.
"""

import json
import math
import os
from dataclasses import asdict, is_dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.core.logger import logger
from src.models.datatypes import DECAY_COLUMNS, CheckResult, ExperimentResult, Verdict

FLOAT_FORMAT = "%.17g"

DECAY_CSV = "decay.csv"
VERDICTS_CSV = "verdicts.csv"
REPORT_JSON = "report.json"
ENSEMBLE_SUMMARY_JSON = "ensemble_summary.json"
AGGREGATE_CSV = "sweep_aggregate.csv"
AGGREGATE_JSON = "sweep_aggregate.json"

VERDICT_COLUMNS = ["name", "passed", "measured", "threshold", "tolerance", "detail"]
ENSEMBLE_COLUMNS = ["member_id", "value"]
CHECK_COLUMNS = ["t", "value"]
AGGREGATE_COLUMNS = [
    "cell", "status", "check", "measured", "predicted", "tolerance", "passed", "refinement_delta", "error",
]


# ── experiment reports ────────────────────────────────────────────────────────

def write_experiment_report(
    result: ExperimentResult,
    output_dir: str,
    formats: Sequence[str] = ("csv", "json"),
    config: Optional[Dict[str, Any]] = None,
    seed: int = 0,
) -> List[str]:
    """Write all files of one experiment into ``output_dir``.

    CSV output: ``decay.csv`` (frozen column order), ``verdicts.csv``, one
    ``check_<name>.csv`` per check series, ``ensemble_<name>_n<n>.csv`` per
    ensemble evaluation and ``<table>.csv`` per extra table. JSON output:
    ``report.json`` (config echo, samples, fits, predicted exponents,
    verdicts, partial flag) and ``ensemble_summary.json``.

    Returns:
        Paths written, in write order.
    """
    os.makedirs(output_dir, exist_ok=True)
    written: List[str] = []

    if "csv" in formats:
        if result.report is not None and result.report.samples:
            written.append(_write_frame(result.report.to_frame(), output_dir, DECAY_CSV))
        written.append(_write_frame(verdict_frame(result.verdicts), output_dir, VERDICTS_CSV))
        for check in result.checks:
            frame = pd.DataFrame({"t": check.times, "value": check.values}, columns=CHECK_COLUMNS)
            written.append(_write_frame(frame, output_dir, f"check_{check.name}.csv"))
        for ens in result.ensembles:
            name = f"ensemble_{ens.name}_n{ens.params.get('n', 0)}.csv"
            written.append(_write_frame(ens.to_frame(), output_dir, name))
        for table_name, frame in result.tables.items():
            written.append(_write_frame(frame, output_dir, f"{table_name}.csv"))

    if "json" in formats:
        written.append(_write_json(report_payload(result, config, seed), output_dir, REPORT_JSON))
        if result.ensembles:
            summary = [
                {"name": e.name, "params": e.params, "count": len(e.values), "summary": e.summary}
                for e in result.ensembles
            ]
            written.append(_write_json(summary, output_dir, ENSEMBLE_SUMMARY_JSON))

    logger.info(f"reports: wrote {len(written)} files to {output_dir}")
    return written


def report_payload(
    result: ExperimentResult,
    config: Optional[Dict[str, Any]] = None,
    seed: int = 0,
) -> Dict[str, Any]:
    """The ``report.json`` document for ``result``."""
    payload: Dict[str, Any] = {
        "kind": result.kind,
        "seed": seed,
        "config": config or {},
        "passed": result.passed,
        "partial": result.partial,
        "flags": list(result.flags),
        "verdicts": [asdict(v) for v in result.verdicts],
    }
    if result.report is not None:
        report = result.report
        payload["decay"] = {
            "alpha": report.alpha,
            "columns": DECAY_COLUMNS,
            "samples": [asdict(s) for s in report.samples],
            "fits": {name: asdict(fit) for name, fit in report.fits.items()},
            "predicted": dict(report.predicted),
            "solver": report.config,
            "partial": report.partial,
            "flags": list(report.flags),
        }
    if result.checks:
        payload["checks"] = [_check_payload(c) for c in result.checks]
    if result.summary:
        payload["summary"] = result.summary
    return payload


def verdict_frame(verdicts: Sequence[Verdict]) -> pd.DataFrame:
    return pd.DataFrame([asdict(v) for v in verdicts], columns=VERDICT_COLUMNS)


def _check_payload(check: CheckResult) -> Dict[str, Any]:
    return {
        "name": check.name,
        "predicted": check.predicted,
        "fit": asdict(check.fit) if check.fit is not None else None,
        "verdict": asdict(check.verdict),
        "flags": list(check.flags),
        "summary": dict(check.summary),
    }


# ── sweep aggregate ───────────────────────────────────────────────────────────

def aggregate_frame(rows: List[Dict[str, Any]], parameters: Sequence[str]) -> pd.DataFrame:
    """Aggregate table: one row per (cell, check), parameter columns after ``cell``.

    When a grid size (a parameter ending in ``.n``) is swept, every check gets
    a refinement delta ``|m_fine - m_coarse| / |m_coarse|`` on its finest cell,
    comparing cells that agree on all other parameters.
    """
    columns = AGGREGATE_COLUMNS[:1] + list(parameters) + AGGREGATE_COLUMNS[1:]
    frame = pd.DataFrame(rows, columns=columns)
    sizes = [p for p in parameters if p == "n" or p.endswith(".n")]
    if sizes and not frame.empty:
        frame["refinement_delta"] = _refinement_deltas(frame, sizes[0], [p for p in parameters if p != sizes[0]])
    return frame


def _refinement_deltas(frame: pd.DataFrame, size: str, others: List[str]) -> pd.Series:
    deltas = pd.Series(np.nan, index=frame.index, dtype=float)
    ok = frame[(frame["status"] == "ok") & frame["measured"].notna()]
    keys = others + ["check"]
    for _, group in ok.groupby(keys, sort=True, dropna=False):
        if group[size].nunique() < 2:
            continue
        ordered = group.sort_values(size, kind="mergesort")
        coarse = float(ordered["measured"].iloc[0])
        fine = float(ordered["measured"].iloc[-1])
        delta = abs(fine - coarse) / abs(coarse) if coarse else math.inf
        deltas[ordered.index[-1]] = delta
    return deltas


def write_aggregate(frame: pd.DataFrame, output_dir: str, formats: Sequence[str] = ("csv", "json")) -> List[str]:
    os.makedirs(output_dir, exist_ok=True)
    written = []
    if "csv" in formats:
        written.append(_write_frame(frame, output_dir, AGGREGATE_CSV))
    if "json" in formats:
        records = frame.astype(object).where(frame.notna(), None).to_dict(orient="records")
        written.append(_write_json(records, output_dir, AGGREGATE_JSON))
    logger.info(f"reports: sweep aggregate with {len(frame)} rows written to {output_dir}")
    return written


# ── helpers ───────────────────────────────────────────────────────────────────

def _write_frame(frame: pd.DataFrame, output_dir: str, name: str) -> str:
    path = os.path.join(output_dir, name)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def _write_json(payload: Any, output_dir: str, name: str) -> str:
    path = os.path.join(output_dir, name)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(jsonable(payload), f, indent=2, allow_nan=False)
        f.write("\n")
    return path


def jsonable(value: Any) -> Any:
    """Recursively convert numpy scalars, tuples and non-finite floats for strict JSON."""
    if is_dataclass(value) and not isinstance(value, type):
        return jsonable(asdict(value))
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if value is None or isinstance(value, str):
        return value
    return str(value)
