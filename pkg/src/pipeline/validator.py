"""Report validator: structural checks on an experiment or sweep report directory.

Checks:
  1. decay.csv has the frozen column order
  2. Sample times strictly increase
  3. Norm columns are nonnegative
  4. At least one verdict is present (report.json or verdicts.csv)
  5. A partial run carries its abort flag
  6. Ensemble CSVs list members 0..N-1 in order

Sweep directories are validated cell by cell after the aggregate table.

Usage:
    python -m src.pipeline.validator output/<report_dir>
"""

import json
import os
import sys
from typing import List, Tuple

import pandas as pd

from src.models.datatypes import DECAY_COLUMNS
from src.pipeline.reports import (
    AGGREGATE_COLUMNS, AGGREGATE_CSV, DECAY_CSV, ENSEMBLE_COLUMNS, REPORT_JSON, VERDICT_COLUMNS, VERDICTS_CSV,
)

_NONNEGATIVE = ["linf", "l2", "sobolev", "moment_q", "residual_R", "contamination"]


def validate(report_dir: str) -> Tuple[bool, List[str]]:
    """Run all validation checks against ``report_dir``.

    Returns:
        Tuple of ``(passed: bool, messages: list[str])`` with one PASS/FAIL
        line per check.
    """
    if not os.path.isdir(report_dir):
        return False, [f"FAIL  report directory not found: {report_dir}"]

    if os.path.exists(os.path.join(report_dir, AGGREGATE_CSV)):
        return _validate_sweep(report_dir)

    messages: List[str] = []
    passed = True

    # ── decay time series ─────────────────────────────────────────────────────
    decay_path = os.path.join(report_dir, DECAY_CSV)
    if os.path.exists(decay_path):
        ok, lines = _validate_decay(decay_path)
        passed &= ok
        messages.extend(lines)

    # ── verdicts ──────────────────────────────────────────────────────────────
    report_path = os.path.join(report_dir, REPORT_JSON)
    report = None
    if os.path.exists(report_path):
        try:
            with open(report_path, encoding="utf-8") as f:
                report = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            return False, messages + [f"FAIL  could not read {REPORT_JSON}: {exc}"]

    verdict_count = _verdict_count(report_dir, report)
    if verdict_count > 0:
        messages.append(f"PASS  {verdict_count} verdicts present")
    elif report is not None and report.get("partial"):
        messages.append("PASS  no verdicts (partial run)")
    else:
        messages.append("FAIL  no verdicts found")
        passed = False

    # ── partial flag ──────────────────────────────────────────────────────────
    if report is not None:
        if report.get("partial") and not any(str(f).startswith("ABORTED") for f in report.get("flags", [])):
            messages.append("FAIL  partial report without an ABORTED flag")
            passed = False
        elif report.get("partial"):
            messages.append("PASS  partial report flagged")
        else:
            messages.append("PASS  complete report")

    # ── ensembles ─────────────────────────────────────────────────────────────
    for name in sorted(os.listdir(report_dir)):
        if name.startswith("ensemble_") and name.endswith(".csv"):
            ok, line = _validate_ensemble(os.path.join(report_dir, name))
            passed &= ok
            messages.append(line)

    if not messages:
        return False, ["FAIL  no report files found"]
    return passed, messages


def _validate_decay(path: str) -> Tuple[bool, List[str]]:
    try:
        frame = pd.read_csv(path)
    except Exception as exc:
        return False, [f"FAIL  could not read {DECAY_CSV}: {exc}"]
    if list(frame.columns) != DECAY_COLUMNS:
        return False, [f"FAIL  {DECAY_CSV} columns {list(frame.columns)} != {DECAY_COLUMNS}"]

    messages = [f"PASS  {DECAY_CSV} column order"]
    passed = True
    t = frame["t"].to_numpy()
    if len(t) < 2 or (t[1:] > t[:-1]).all():
        messages.append(f"PASS  t strictly increasing over {len(t)} samples")
    else:
        messages.append("FAIL  t is not strictly increasing")
        passed = False

    negative = [c for c in _NONNEGATIVE if (frame[c] < 0).any()]
    if not negative:
        messages.append("PASS  norms nonnegative")
    else:
        messages.append(f"FAIL  negative values in {negative}")
        passed = False
    return passed, messages


def _verdict_count(report_dir: str, report: dict | None) -> int:
    if report is not None:
        return sum(1 for v in report.get("verdicts", []) if "name" in v and "passed" in v)
    path = os.path.join(report_dir, VERDICTS_CSV)
    if not os.path.exists(path):
        return 0
    try:
        frame = pd.read_csv(path)
    except Exception:
        return 0
    if list(frame.columns) != VERDICT_COLUMNS:
        return 0
    return len(frame)


def _validate_ensemble(path: str) -> Tuple[bool, str]:
    name = os.path.basename(path)
    try:
        frame = pd.read_csv(path)
    except Exception as exc:
        return False, f"FAIL  could not read {name}: {exc}"
    if list(frame.columns) != ENSEMBLE_COLUMNS:
        return False, f"FAIL  {name} columns {list(frame.columns)} != {ENSEMBLE_COLUMNS}"
    if frame["member_id"].tolist() != list(range(len(frame))):
        return False, f"FAIL  {name} member ids out of order"
    return True, f"PASS  {name}: {len(frame)} members"


def _validate_sweep(report_dir: str) -> Tuple[bool, List[str]]:
    frame = pd.read_csv(os.path.join(report_dir, AGGREGATE_CSV))
    missing = [c for c in AGGREGATE_COLUMNS if c not in frame.columns]
    if missing:
        return False, [f"FAIL  {AGGREGATE_CSV} missing columns: {missing}"]
    messages = [f"PASS  {AGGREGATE_CSV}: {frame['cell'].nunique()} cells"]
    passed = True
    failed = sorted(frame.loc[frame["status"] == "failed", "cell"].unique())
    if failed:
        messages.append(f"FAIL  failed cells: {failed}")
        passed = False
    for cell in sorted(frame["cell"].unique()):
        cell_dir = os.path.join(report_dir, cell)
        if cell in failed or not os.path.isdir(cell_dir):
            continue
        ok, lines = validate(cell_dir)
        passed &= ok
        messages.extend(f"{line[:6]}{cell}: {line[6:]}" for line in lines)
    return passed, messages


def main() -> int:
    if len(sys.argv) < 2:
        print("Usage: python -m src.pipeline.validator <report_dir>")
        return 1
    passed, messages = validate(sys.argv[1])
    for msg in messages:
        print(msg)
    if passed:
        print("\nVALIDATION PASSED")
        return 0
    print("\nVALIDATION FAILED")
    return 1


if __name__ == "__main__":
    sys.exit(main())
