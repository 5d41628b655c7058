"""QG decay experiment entry point.

Usage:
    python run_experiment.py run configs/simulate_alpha1.yaml
    python run_experiment.py sweep configs/sweep_alpha.cfg --jobs 4 --out output/sweep

Loads the experiment config, applies command-line overrides, runs the
experiment (or every sweep cell) and writes the reports. Exit code is 0 iff
every enabled verdict passes; failures are listed on stderr.
"""

import argparse
import sys
from typing import List, Optional

import yaml
from dotenv import load_dotenv

load_dotenv()  # must precede src imports so env vars are available at module load

from src.core.config import load_config, parse_experiment_config  # noqa: E402
from src.core.errors import ConfigError  # noqa: E402
from src.core.logger import logger  # noqa: E402
from src.models.datatypes import ExperimentConfig  # noqa: E402
from src.pipeline.engine import ExperimentEngine, describe, run_sweep  # noqa: E402


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Decay verification experiments for 2D dissipative QG.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "run one experiment"), ("sweep", "run a parameter sweep")):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("config", help="experiment file (.yaml, .json or flat .cfg)")
        cmd.add_argument("--out", help="report directory (default: output_dir or $QGDECAY_OUTPUT_ROOT)")
        cmd.add_argument("--jobs", type=int, help="worker limit for ensembles and sweep cells")
        cmd.add_argument("--seed", type=int, help="override the config seed")
        cmd.add_argument("--format", choices=["csv", "json", "both"], help="report formats")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Run the CLI. Returns 0 iff all verdicts PASS."""
    args = build_parser().parse_args(argv)
    try:
        raw = load_config(args.config)
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.jobs is not None:
            raw["jobs"] = args.jobs
        if args.format is not None:
            raw["formats"] = args.format
        if args.out is not None:
            raw["output_dir"] = args.out
        config = parse_experiment_config(raw)
    except ConfigError as exc:
        logger.error(f"run_experiment: invalid config: {exc}")
        print(f"ERROR: config field {exc.field_path}: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError, yaml.YAMLError) as exc:
        logger.error(f"run_experiment: failed to load config: {exc}")
        print(f"ERROR: {exc}", file=sys.stderr)
        return 2

    if args.command == "sweep":
        if not config.sweep:
            print("ERROR: config has no sweep section", file=sys.stderr)
            return 2
        return _sweep(config)
    return _run(config)


def _run(config: ExperimentConfig) -> int:
    try:
        result = ExperimentEngine(config).run()
    except Exception as exc:
        logger.error(f"run_experiment: ExperimentEngine raised: {exc}", exc_info=True)
        print(f"ERROR: experiment failed: {exc}", file=sys.stderr)
        return 1

    for status, line in describe(result):
        print(f"{status}  {line}", file=sys.stdout if status == "PASS" else sys.stderr)
    for flag in result.flags:
        print(f"FLAG  {flag}")
    if result.passed:
        print(f"SUCCESS: {config.kind} passed, reports in {config.output_dir}")
        return 0
    print(f"FAILED: {len(result.failures)} verdicts failed, reports in {config.output_dir}", file=sys.stderr)
    return 1


def _sweep(config: ExperimentConfig) -> int:
    sweep = run_sweep(config)
    for cell in sweep.cells:
        status = "PASS" if cell["status"] == "ok" and cell["passed"] else "FAIL"
        print(f"{status}  {cell['cell']} ({cell['status']})", file=sys.stdout if status == "PASS" else sys.stderr)
    if sweep.passed:
        print(f"SUCCESS: {len(sweep.cells)} cells passed, aggregate in {sweep.output_dir}")
        return 0
    print(f"FAILED: see {sweep.output_dir}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
