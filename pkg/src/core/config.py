"""Configuration loading for experiment files and environment defaults."""

import copy
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Tuple

import yaml
from dotenv import load_dotenv

from src.core.errors import ConfigError
from src.models.datatypes import ExperimentConfig, GridSpec, InitialDataSpec, SimConfig

# Load environment variables from .env file
load_dotenv()

KINDS = ("simulate", "theorem1", "linear-lemma", "kernel-verify", "inequality-suite", "duhamel-check")
FORMATS = ("csv", "json")
FLAT_SUFFIXES = (".cfg", ".conf", ".txt", ".ini")

_SIM_FIELDS = {
    "alpha": float, "t_end": float, "amplitude": float, "c_cfl": float, "dt": float,
    "dt_relative": float, "dt_initial": float, "dt_max": float, "sample_t0": float,
    "samples_per_octave": int, "sigma": float, "q": float, "nonlinear": bool, "rescale": bool,
    "dump_dir": str,
}


def default_output_root() -> str:
    return os.getenv("QGDECAY_OUTPUT_ROOT", "output")


def load_config(config_path: str | Path = "config.yaml") -> Dict[str, Any]:
    """
    Load an experiment file into a nested dictionary.

    YAML (``.yaml``/``.yml``), JSON (``.json``) and flat ``key = value`` files
    with dotted keys or ``[section]`` headers are accepted; flat values are
    parsed as YAML scalars or lists.

    Args:
        config_path (str | Path): Path to the configuration file. Defaults to "config.yaml".

    Returns:
        Dict[str, Any]: The loaded mapping, unvalidated.
    """
    config_file = Path(config_path)
    if not config_file.exists():
        raise FileNotFoundError(f"Configuration file not found at {config_path}")

    text = config_file.read_text(encoding="utf-8")
    suffix = config_file.suffix.lower()
    if suffix == ".json":
        config_data = json.loads(text)
    elif suffix in FLAT_SUFFIXES:
        config_data = parse_flat(text)
    else:
        config_data = yaml.safe_load(text)

    if not config_data or not isinstance(config_data, dict):
        raise ValueError(f"Configuration file {config_path} is empty or invalid.")
    return config_data


def parse_flat(text: str) -> Dict[str, Any]:
    """Parse ``key = value`` lines; ``a.b = 1`` and ``[a]`` + ``b = 1`` are equivalent."""
    data: Dict[str, Any] = {}
    section = ""
    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}", f"expected 'key = value', got {raw_line.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        dotted = f"{section}.{key}" if section else key
        set_dotted(data, dotted, _scalar(value) if value else None)
    return data


def _scalar(text: str) -> Any:
    """YAML scalar or list; bare exponent literals such as ``1e-6`` become floats."""
    value = yaml.safe_load(text)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    return value


def set_dotted(data: Dict[str, Any], dotted: str, value: Any) -> None:
    node = data
    parts = dotted.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(dotted, f"'{part}' is not a section")
    node[parts[-1]] = value


def apply_overrides(raw: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Deep copy of ``raw`` with dotted-path overrides applied."""
    out = copy.deepcopy(raw)
    for dotted, value in overrides.items():
        set_dotted(out, dotted, value)
    return out


# ── schema ────────────────────────────────────────────────────────────────────

def parse_experiment_config(raw: Dict[str, Any]) -> ExperimentConfig:
    """Validate ``raw`` and build an ExperimentConfig.

    Raises:
        ConfigError: Naming the dotted path of the first offending field.
    """
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError("kind", f"must be one of {list(KINDS)}, got {kind!r}")

    sim = None
    if "sim" in raw:
        sim = parse_sim_config(_section(raw, "sim"))
    elif kind in ("simulate", "theorem1", "linear-lemma", "duhamel-check"):
        raise ConfigError("sim", f"required for kind {kind!r}")

    tolerances = _section(raw, "tolerances")
    for key, value in tolerances.items():
        number = _typed(tolerances, key, float, None, prefix="tolerances.")
        if number is None or number < 0:
            raise ConfigError(f"tolerances.{key}", f"must be a nonnegative number, got {value!r}")
        tolerances[key] = number

    sweep = _flatten(_section(raw, "sweep"))
    for key, value in sweep.items():
        if not isinstance(value, list) or not value:
            raise ConfigError(f"sweep.{key}", "must be a nonempty list of values")

    return ExperimentConfig(
        kind=kind,
        seed=_typed(raw, "seed", int, 0),
        output_dir=str(raw.get("output_dir") or default_output_root()),
        formats=parse_formats(raw.get("formats", "both")),
        sim=sim,
        kernel=_section(raw, "kernel"),
        inequality=_section(raw, "inequality"),
        duhamel=_section(raw, "duhamel"),
        tolerances={k: float(v) for k, v in tolerances.items()},
        sweep=sweep,
        jobs=_typed(raw, "jobs", int, 1),
        raw=copy.deepcopy(raw),
    )


def parse_sim_config(sim: Dict[str, Any]) -> SimConfig:
    """Build a SimConfig from the ``sim`` section (``n`` and ``box_length`` form the grid)."""
    for required in ("alpha", "n", "box_length", "t_end"):
        if required not in sim:
            raise ConfigError(f"sim.{required}", "is required")
    try:
        grid = GridSpec(int(sim["n"]), float(sim["box_length"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError("sim.n", str(exc)) from exc

    kwargs: Dict[str, Any] = {}
    for key, cast in _SIM_FIELDS.items():
        if sim.get(key) is not None:
            kwargs[key] = _typed(sim, key, cast, None, prefix="sim.")
    if sim.get("sample_times") is not None:
        times = sim["sample_times"]
        if not isinstance(times, list):
            raise ConfigError("sim.sample_times", "must be a list of times")
        kwargs["sample_times"] = tuple(float(t) for t in times)
    if sim.get("initial_data") is not None:
        kwargs["initial_data"] = _initial_data(sim["initial_data"])

    try:
        return SimConfig(grid=grid, **kwargs)
    except ValueError as exc:
        raise ConfigError(_field_from_message(str(exc)), str(exc)) from exc


def parse_formats(value: Any) -> Tuple[str, ...]:
    if value == "both":
        return FORMATS
    items: List[str] = [value] if isinstance(value, str) else list(value or [])
    for item in items:
        if item not in FORMATS:
            raise ConfigError("formats", f"unknown report format {item!r}; use csv, json or both")
    return tuple(f for f in FORMATS if f in items)


# ── helpers ───────────────────────────────────────────────────────────────────

def _section(raw: Dict[str, Any], name: str) -> Dict[str, Any]:
    value = raw.get(name) or {}
    if not isinstance(value, dict):
        raise ConfigError(name, "must be a section (mapping)")
    return dict(value)


def _typed(raw: Dict[str, Any], key: str, cast: type, default: Any, prefix: str = "") -> Any:
    if raw.get(key) is None:
        return default
    value = raw[key]
    if cast is bool:
        if not isinstance(value, bool):
            raise ConfigError(prefix + key, f"must be true or false, got {value!r}")
        return value
    if cast in (int, float) and isinstance(value, bool):
        raise ConfigError(prefix + key, f"must be a number, got {value!r}")
    try:
        out = cast(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(prefix + key, f"cannot read {value!r} as {cast.__name__}") from exc
    if cast is int and out != value:
        raise ConfigError(prefix + key, f"must be an integer, got {value!r}")
    return out


def _initial_data(value: Any) -> InitialDataSpec:
    if isinstance(value, str):
        return InitialDataSpec(value, {})
    if not isinstance(value, dict) or "family" not in value:
        raise ConfigError("sim.initial_data.family", "is required")
    params = {k: v for k, v in value.items() if k != "family"}
    params.update(params.pop("params", None) or {})
    return InitialDataSpec(str(value["family"]), params)


def _flatten(section: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    """Nested sweep sections to dotted keys: ``{"sim": {"alpha": [..]}}`` -> ``{"sim.alpha": [..]}``."""
    out: Dict[str, Any] = {}
    for key, value in section.items():
        if isinstance(value, dict):
            out.update(_flatten(value, f"{prefix}{key}."))
        else:
            out[f"{prefix}{key}"] = value
    return out


def _field_from_message(message: str) -> str:
    """``SimConfig: q must exceed ...`` -> ``sim.q``."""
    words = message.split(":", 1)[-1].split()
    return f"sim.{words[0]}" if words else "sim"
