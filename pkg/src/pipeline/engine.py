"""Experiment engine: runs one configured experiment or a parameter sweep.

Flow per experiment:
  1. Build the inputs named by ``kind`` (solver run, kernel grid, ensembles)
  2. Run its checks, each one isolated: a failing check, or one without
     enough samples to fit, is logged and recorded as a FAIL verdict, and the
     engine moves on to the next check. Rate checks are skipped (and flagged)
     only for runs that stop at t = 0
  3. Write the reports into the output directory

Sweeps expand ``sweep`` (dotted path -> list of values) into the Cartesian
product of cells, run each cell into its own subdirectory concurrently up to
``jobs``, and always write the aggregate table, failed cells included.
"""

import itertools
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.analysis import diagnostics
from src.analysis.inequalities import run_inequality_suite
from src.core.config import apply_overrides, parse_experiment_config
from src.core.errors import InsufficientDataError, PicardDivergenceError, QGDecayError
from src.core.logger import logger
from src.models.datatypes import (
    CheckResult, DecayReport, ExperimentConfig, ExperimentResult, GridSpec, KernelSpec, SimConfig, SimState,
    Verdict,
)
from src.numerics import spectral
from src.numerics.kernel import kernel_table
from src.numerics.solver import (
    duhamel_residual, initial_field, integrate, picard_sequence, rescale_history, run_trajectory,
    sample_schedule,
)
from src.pipeline.reports import aggregate_frame, write_aggregate, write_experiment_report

DEFAULT_TOLERANCES: Dict[str, float] = {
    "mass": diagnostics.MASS_TOLERANCE,
    "nonnegativity": diagnostics.NEGATIVITY_TOLERANCE,
    "linf_decay": 0.1,
    "moment_growth": 0.05,
    "sobolev_decay": 0.1,
    "theorem1": 0.1,
    "theorem1_excess": 0.2,
    "residual_decay": 0.1,
    "linear_lemma": 0.05,
    "kernel": 1e-6,
    "kernel_slope": 0.1,
    "duhamel": 1e-4,
}


@dataclass
class SweepResult:
    """Cells run by a sweep plus the aggregate table."""
    cells: List[Dict[str, Any]]
    aggregate: pd.DataFrame
    output_dir: str

    @property
    def passed(self) -> bool:
        return all(c["status"] == "ok" and c["passed"] for c in self.cells)


class ExperimentEngine:
    """Runs a single experiment described by an :class:`ExperimentConfig`.

    Args:
        config: Parsed experiment config.
        output_dir: Report directory; defaults to ``config.output_dir``.
    """

    def __init__(self, config: ExperimentConfig, output_dir: Optional[str] = None) -> None:
        self.config = config
        self.output_dir = output_dir or config.output_dir
        self.tolerances = {**DEFAULT_TOLERANCES, **config.tolerances}

    # ── public ────────────────────────────────────────────────────────────────

    def run(self) -> ExperimentResult:
        """Execute the experiment and write its reports.

        Returns:
            The :class:`ExperimentResult`; ``result.passed`` decides the exit code.
        """
        result = self.execute()
        write_experiment_report(result, self.output_dir, self.config.formats, self.config.raw, self.config.seed)
        if result.passed:
            logger.info(f"ExperimentEngine: {result.kind} PASS ({len(result.verdicts)} verdicts)")
        else:
            names = ", ".join(v.name for v in result.failures) or "partial run"
            logger.warning(f"ExperimentEngine: {result.kind} FAIL: {names}")
        return result

    def execute(self) -> ExperimentResult:
        """Run the experiment without writing anything."""
        kind = self.config.kind
        handlers: Dict[str, Callable[[ExperimentResult], None]] = {
            "simulate": self._simulate,
            "theorem1": self._theorem1,
            "linear-lemma": self._linear_lemma,
            "kernel-verify": self._kernel_verify,
            "inequality-suite": self._inequality_suite,
            "duhamel-check": self._duhamel_check,
        }
        result = ExperimentResult(kind=kind)
        logger.info(f"ExperimentEngine: running {kind} (seed={self.config.seed}) -> {self.output_dir}")
        try:
            handlers[kind](result)
        except QGDecayError as exc:
            logger.error(f"ExperimentEngine: {kind} aborted: {exc}", exc_info=True)
            result.partial = True
            result.flags.append(f"ABORTED: {exc}")
        return result

    # ── experiment kinds ──────────────────────────────────────────────────────

    def _simulate(self, result: ExperimentResult) -> None:
        sim = self._sim()
        trajectory, report = integrate(sim, allow_partial=True)
        self._attach_report(result, report)
        report.predicted.update(predicted_exponents(sim.alpha, sim.q, sim.sigma))
        if not trajectory:
            return
        q = float(sim.q if sim.q is not None else 4.0 / sim.alpha)
        self._verdict(result, "mass", lambda: diagnostics.mass_check(report, self._tol("mass")))
        self._verdict(result, "nonnegativity",
                      lambda: diagnostics.nonnegativity_check(trajectory, self._tol("nonnegativity")))
        if self._single_sample(result, trajectory, ("linf_decay", "moment_growth", "sobolev_decay")):
            return
        self._check(result, "linf_decay", lambda: diagnostics.lp_decay_check(
            trajectory, sim.alpha, np.inf, self._tol("linf_decay")))
        self._check(result, "moment_growth", lambda: diagnostics.moment_growth_check(
            report, sim.alpha, q, self._tol("moment_growth")))
        self._check(result, "sobolev_decay", lambda: diagnostics.sobolev_decay_check(
            report, sim.alpha, sim.sigma, self._tol("sobolev_decay")))

    def _theorem1(self, result: ExperimentResult) -> None:
        sim = self._sim()
        trajectory, report = integrate(sim, allow_partial=True)
        self._attach_report(result, report)
        report.predicted.update(predicted_exponents(sim.alpha, sim.q, sim.sigma))
        if not trajectory:
            return
        self._verdict(result, "mass", lambda: diagnostics.mass_check(report, self._tol("mass")))
        if self._single_sample(result, trajectory, ("theorem1", "residual_decay")):
            return
        self._check(result, "theorem1", lambda: diagnostics.theorem1_residual(
            report, sim.alpha, self._tol("theorem1"), self._tol("theorem1_excess")))

        linear = run_trajectory(
            initial_field(sim), replace(sim, nonlinear=False),
            diagnostics=False, rescale_times=rescale_history(trajectory),
        )
        self._check(result, "residual_decay", lambda: diagnostics.residual_decay_check(
            trajectory, linear, sim.alpha, tolerance=self._tol("residual_decay")))
        final = trajectory[-1]
        result.summary.update({"doublings": final.doublings, "trailing_mass": final.trailing_mass,
                               "steps": final.step_count})

    def _linear_lemma(self, result: ExperimentResult) -> None:
        sim = self._sim()
        times = sample_schedule(sim)[1:]
        self._check(result, "linear_lemma", lambda: diagnostics.linear_lemma_check(
            initial_field(sim), sim.alpha, times, self._tol("linear_lemma")))

    def _kernel_verify(self, result: ExperimentResult) -> None:
        settings = self.config.kernel
        alphas = settings.get("alphas", [settings.get("alpha", 1.0)])
        t = float(settings.get("t", 1.0))
        scaling_times = tuple(float(s) for s in settings.get("scaling_times", (2.0, 8.0)))
        for alpha in (float(a) for a in alphas):
            grid = GridSpec(int(settings.get("n", 256)), float(settings.get("box_length", 32.0 * t ** (1.0 / alpha))))
            try:
                verdicts = diagnostics.kernel_verify_checks(
                    alpha, grid, t, self._tol("kernel"), scaling_times, self._tol("kernel_slope"))
            except QGDecayError as exc:
                logger.error(f"ExperimentEngine: kernel checks failed for alpha={alpha}: {exc}", exc_info=True)
                verdicts = [Verdict(f"kernel_a{alpha:g}", False, float("nan"), 0.0, self._tol("kernel"), str(exc))]
            for v in verdicts:
                if len(alphas) > 1:
                    v.name = f"{v.name}_a{alpha:g}"
                result.verdicts.append(v)
            if settings.get("table", True):
                radii = np.linspace(0.0, 8.0 * t ** (1.0 / alpha), int(settings.get("table_points", 33)))
                result.tables[f"kernel_table_a{alpha:g}"] = kernel_table(KernelSpec(alpha, t), radii)

    def _inequality_suite(self, result: ExperimentResult) -> None:
        keys = ("sv", "refinement", "commutator", "asymmetry")
        tolerances = {k: v for k, v in self.config.tolerances.items() if k in keys}
        ensembles, verdicts = run_inequality_suite(
            self.config.inequality, self.config.seed, self.config.jobs, tolerances)
        result.ensembles.extend(ensembles)
        result.verdicts.extend(verdicts)

    def _duhamel_check(self, result: ExperimentResult) -> None:
        sim = self._sim()
        settings = self.config.duhamel
        trajectory, report = integrate(sim, allow_partial=True)
        self._attach_report(result, report)
        if not trajectory:
            return

        def duhamel() -> Verdict:
            residual = duhamel_residual(
                trajectory, sim,
                n_quad=int(settings.get("n_quad", 8)),
                n_panels=int(settings.get("n_panels", 20)),
                grading=float(settings.get("grading", 0.5)),
            )
            result.summary["duhamel_residual"] = residual
            return Verdict("duhamel", bool(residual <= self._tol("duhamel")), residual, 0.0, self._tol("duhamel"))

        self._verdict(result, "duhamel", duhamel)
        if settings.get("picard", True):
            self._picard(result, sim, settings)

    def _picard(self, result: ExperimentResult, sim: SimConfig, settings: Dict[str, Any]) -> None:
        k = int(settings.get("picard_k", 4))
        t = float(settings.get("picard_t", min(1.0, sim.t_end) or 1.0))
        try:
            iterates = picard_sequence(initial_field(sim), sim.alpha, t, k, int(settings.get("picard_steps", 64)))
        except PicardDivergenceError as exc:
            logger.error(f"ExperimentEngine: {exc}", exc_info=True)
            result.verdicts.append(Verdict("picard_contraction", False, float("inf"), 1.0, 0.0, str(exc)))
            return
        diffs = [
            spectral.spectral_l2_norm(spectral.from_spectral(
                a.grid, spectral.as_spectral(b) - spectral.as_spectral(a)))
            for a, b in zip(iterates, iterates[1:])
        ]
        result.summary["picard_differences"] = diffs
        # differences at round-off level carry no contraction information
        floor = 1e-12 * spectral.spectral_l2_norm(iterates[0])
        ratios = [b / a for a, b in zip(diffs, diffs[1:]) if a > floor]
        worst = max(ratios) if ratios else 0.0
        result.verdicts.append(Verdict("picard_contraction", bool(worst < 1.0), worst, 1.0, 0.0,
                                       f"{len(diffs)} differences at t={t:g}"))

    # ── internal ──────────────────────────────────────────────────────────────

    def _sim(self) -> SimConfig:
        if self.config.sim is None:
            raise QGDecayError(f"{self.config.kind} needs a sim section")
        return self.config.sim

    def _tol(self, name: str) -> float:
        return float(self.tolerances[name])

    def _attach_report(self, result: ExperimentResult, report: DecayReport) -> None:
        result.report = report
        result.partial = result.partial or report.partial
        result.flags.extend(report.flags)

    def _single_sample(self, result: ExperimentResult, trajectory: List[SimState], names: Tuple[str, ...]) -> bool:
        """Flag ``names`` as SKIPPED when the run never left t = 0; rates need a time span."""
        if any(state.t > 0 for state in trajectory):
            return False
        for name in names:
            logger.info(f"ExperimentEngine: {name} skipped, run stops at t = 0")
            result.flags.append(f"SKIPPED: {name}")
        return True

    def _check(self, result: ExperimentResult, name: str, run: Callable[[], CheckResult]) -> None:
        """Run one rate check and fold its fit, prediction and verdict into ``result``."""
        try:
            check = run()
        except InsufficientDataError as exc:
            logger.error(f"ExperimentEngine: {name} could not be evaluated: {exc}")
            result.flags.append(f"INSUFFICIENT_DATA: {name}")
            result.verdicts.append(Verdict(name, False, float("nan"), float("nan"), self._tol(name), str(exc)))
            return
        except (QGDecayError, ValueError) as exc:
            logger.error(f"ExperimentEngine: {name} failed: {exc}", exc_info=True)
            result.verdicts.append(Verdict(name, False, float("nan"), float("nan"), self._tol(name), str(exc)))
            return
        result.checks.append(check)
        result.verdicts.append(check.verdict)
        if result.report is not None:
            result.report.predicted[check.name] = check.predicted
            if check.fit is not None:
                result.report.fits[check.name] = check.fit
            result.report.verdicts.append(check.verdict)

    def _verdict(self, result: ExperimentResult, name: str, run: Callable[[], Verdict]) -> None:
        try:
            verdict = run()
        except QGDecayError as exc:
            logger.error(f"ExperimentEngine: {name} failed: {exc}", exc_info=True)
            verdict = Verdict(name, False, float("nan"), 0.0, self._tol(name), str(exc))
        result.verdicts.append(verdict)
        if result.report is not None:
            result.report.verdicts.append(verdict)


# ── sweeps ────────────────────────────────────────────────────────────────────

def sweep_cells(sweep: Dict[str, List[Any]]) -> List[Dict[str, Any]]:
    """Cartesian product of the sweep axes in declaration order."""
    keys = list(sweep)
    return [dict(zip(keys, values)) for values in itertools.product(*(sweep[k] for k in keys))]


def cell_name(index: int, overrides: Dict[str, Any]) -> str:
    parts = [f"{key.split('.')[-1]}{value}" for key, value in overrides.items()]
    return re.sub(r"[^A-Za-z0-9_.+-]", "_", f"cell{index:03d}_" + "_".join(parts))


def run_sweep(config: ExperimentConfig, output_dir: Optional[str] = None, jobs: Optional[int] = None) -> SweepResult:
    """Run every sweep cell in its own subdirectory and write the aggregate table.

    A failing cell is logged, marked ``failed`` in the aggregate and does not
    stop the other cells.
    """
    output_dir = output_dir or config.output_dir
    jobs = max(1, jobs or config.jobs)
    base = {k: v for k, v in config.raw.items() if k != "sweep"}
    cells = sweep_cells(config.sweep)
    tasks = [
        (cell_name(i, overrides), apply_overrides(base, overrides), os.path.join(output_dir, cell_name(i, overrides)))
        for i, overrides in enumerate(cells)
    ]
    logger.info(f"run_sweep: {len(tasks)} cells over {list(config.sweep)} with {jobs} jobs")

    if jobs == 1:
        outcomes = [run_cell(*task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run_cell, *zip(*tasks)))

    rows: List[Dict[str, Any]] = []
    for overrides, outcome in zip(cells, outcomes):
        for row in outcome["rows"]:
            rows.append({**row, **overrides})
    frame = aggregate_frame(rows, list(config.sweep))
    write_aggregate(frame, output_dir, config.formats)
    failed = [o["cell"] for o in outcomes if o["status"] != "ok"]
    if failed:
        logger.warning(f"run_sweep: {len(failed)} cells failed: {failed}")
    return SweepResult(cells=outcomes, aggregate=frame, output_dir=output_dir)


def run_cell(name: str, raw: Dict[str, Any], output_dir: str) -> Dict[str, Any]:
    """Run one sweep cell; never raises. Returns aggregate rows plus the cell status."""
    try:
        config = parse_experiment_config(raw)
        result = ExperimentEngine(config, output_dir).run()
    except Exception as exc:
        logger.error(f"run_sweep: cell {name} failed: {exc}", exc_info=True)
        row = {"cell": name, "status": "failed", "error": str(exc)}
        return {"cell": name, "status": "failed", "passed": False, "rows": [row]}
    status = "partial" if result.partial else "ok"
    return {"cell": name, "status": status, "passed": result.passed, "rows": _cell_rows(name, status, result)}


def _cell_rows(name: str, status: str, result: ExperimentResult) -> List[Dict[str, Any]]:
    # theorem1 fits R / log(2+t)**power, so the log power of R itself is slope + power
    predicted = {
        c.name: (c.predicted, c.verdict.measured if c.fit is None
                 else c.fit.exponent + (c.predicted if c.name == "theorem1" else 0.0))
        for c in result.checks
    }
    rows = []
    for v in result.verdicts:
        pred, measured = predicted.get(v.name, (v.threshold, v.measured))
        rows.append({
            "cell": name, "status": status, "check": v.name, "measured": measured, "predicted": pred,
            "tolerance": v.tolerance, "passed": v.passed, "error": "",
        })
    if not rows:
        rows.append({"cell": name, "status": status, "error": "; ".join(result.flags)})
    return rows


def predicted_exponents(alpha: float, q: Optional[float] = None, sigma: float = 2.5) -> Dict[str, float]:
    """Decay and growth exponents the rate checks compare against."""
    q = 4.0 / alpha if q is None else q
    return {
        "linf_decay": -2.0 / alpha,
        "moment_growth": 2.0 / (alpha * q),
        "sobolev_decay": -(1.0 + sigma) / alpha,
        "theorem1": diagnostics.theorem1_power(alpha),
    }


def describe(result: ExperimentResult) -> List[Tuple[str, str]]:
    """``(status, line)`` pairs for the console summary."""
    lines = []
    for v in result.verdicts:
        status = "PASS" if v.passed else "FAIL"
        lines.append((status, f"{v.name}: measured {v.measured:.6g}, threshold {v.threshold:.6g}, tol {v.tolerance:g}"))
    if result.partial:
        lines.append(("FAIL", "partial run: " + "; ".join(result.flags)))
    return lines
