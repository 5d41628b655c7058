"""Data structures for the QG decay toolkit."""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
import pandas as pd

Representation = Literal["physical", "spectral", "both"]

# Frozen column order of the per-sample decay CSV.
DECAY_COLUMNS = [
    "t", "mass", "linf", "l2", "sobolev", "moment_q", "residual_R", "contamination",
]


@dataclass(frozen=True)
class GridSpec:
    """Centered periodic square grid standing in for the plane.

    Node ``(j1, j2)`` sits at ``(-L/2 + j1*dx, -L/2 + j2*dx)``; arrays are indexed
    ``[j1, j2]`` (``indexing='ij'``). Wavenumbers are ``2*pi/L`` times the integer
    mode index in the standard FFT layout.
    """
    n: int
    box_length: float

    def __post_init__(self) -> None:
        if self.n < 32 or self.n & (self.n - 1):
            raise ValueError(f"GridSpec: n must be a power of two >= 32, got {self.n}")
        if not self.box_length > 0:
            raise ValueError(f"GridSpec: box_length must be positive, got {self.box_length}")

    @property
    def dx(self) -> float:
        return self.box_length / self.n

    @property
    def cell_area(self) -> float:
        return self.dx * self.dx

    @cached_property
    def coords(self) -> np.ndarray:
        return -0.5 * self.box_length + self.dx * np.arange(self.n)

    @cached_property
    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(self.coords, self.coords, indexing="ij"))  # type: ignore[return-value]

    @cached_property
    def radius(self) -> np.ndarray:
        x1, x2 = self.mesh
        return np.hypot(x1, x2)

    @cached_property
    def mode_index(self) -> np.ndarray:
        """Integer mode numbers ``m`` in FFT order; the Nyquist mode is ``-n/2``."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).round().astype(np.int64)

    @cached_property
    def wavenumbers(self) -> Tuple[np.ndarray, np.ndarray]:
        k = 2.0 * np.pi / self.box_length * self.mode_index.astype(float)
        return tuple(np.meshgrid(k, k, indexing="ij"))  # type: ignore[return-value]

    @cached_property
    def kabs(self) -> np.ndarray:
        k1, k2 = self.wavenumbers
        return np.hypot(k1, k2)

    @cached_property
    def k_max(self) -> float:
        """Largest resolved wavenumber per axis."""
        return np.pi * self.n / self.box_length

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True off the Nyquist row and column."""
        m = self.mode_index
        keep = m != -(self.n // 2)
        return np.logical_and.outer(keep, keep)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3 rule: keep modes with ``max(|m1|, |m2|) <= n/3``."""
        keep = np.abs(self.mode_index) <= self.n / 3.0
        return np.logical_and.outer(keep, keep)

    @cached_property
    def centering_phase(self) -> np.ndarray:
        """``(-1)**(m1 + m2)``: maps continuous transforms onto the centered DFT."""
        s = np.where(self.mode_index % 2 == 0, 1.0, -1.0)
        return np.multiply.outer(s, s)

    def doubled(self) -> "GridSpec":
        return GridSpec(self.n, 2.0 * self.box_length)


@dataclass(frozen=True, eq=False)
class Field:
    """Scalar field on a grid, held in physical and/or spectral form.

    Arrays are copied and made read-only on construction. The spectral array is
    the unnormalised ``fft2`` of the physical array.
    """
    grid: GridSpec
    values_phys: Optional[np.ndarray] = None
    values_spec: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.values_phys is None and self.values_spec is None:
            raise ValueError("Field: at least one representation is required")
        shape = (self.grid.n, self.grid.n)
        if self.values_phys is not None:
            phys = np.array(self.values_phys, dtype=np.float64)
            if phys.shape != shape:
                raise ValueError(f"Field: physical shape {phys.shape} != {shape}")
            phys.setflags(write=False)
            object.__setattr__(self, "values_phys", phys)
        if self.values_spec is not None:
            spec = np.array(self.values_spec, dtype=np.complex128)
            if spec.shape != shape:
                raise ValueError(f"Field: spectral shape {spec.shape} != {shape}")
            spec.setflags(write=False)
            object.__setattr__(self, "values_spec", spec)

    @property
    def state(self) -> Representation:
        if self.values_phys is not None and self.values_spec is not None:
            return "both"
        return "physical" if self.values_phys is not None else "spectral"

    @classmethod
    def from_physical(cls, grid: GridSpec, values: np.ndarray) -> "Field":
        return cls(grid=grid, values_phys=values)

    @classmethod
    def from_spectral(cls, grid: GridSpec, values: np.ndarray) -> "Field":
        return cls(grid=grid, values_spec=values)


@dataclass(frozen=True)
class KernelSpec:
    """Identifies the derivative ``d^beta G_alpha(t, .)`` of the fractional heat kernel."""
    alpha: float
    t: float
    beta: Tuple[int, int] = (0, 0)

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 2.0:
            raise ValueError(f"KernelSpec: alpha must lie in (0, 2], got {self.alpha}")
        if not self.t > 0.0:
            raise ValueError(f"KernelSpec: t must be positive, got {self.t}")
        if len(self.beta) != 2 or min(self.beta) < 0 or sum(self.beta) > 3:
            raise ValueError(f"KernelSpec: beta must be nonnegative with |beta| <= 3, got {self.beta}")

    @property
    def order(self) -> int:
        return int(sum(self.beta))


@dataclass
class InitialDataSpec:
    """Named initial-data family plus its parameters (amplitude excluded)."""
    family: str
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass
class SimConfig:
    """Solver parameters.

    ``amplitude=None`` selects ``1e-2 * G_alpha(1, 0)``; ``q=None`` selects ``4/alpha``.
    Sample times are ``sample_t0 * 2**(k/samples_per_octave)`` up to ``t_end``
    unless ``sample_times`` is given.
    """
    alpha: float
    grid: GridSpec
    t_end: float
    initial_data: InitialDataSpec = field(
        default_factory=lambda: InitialDataSpec("radial_gaussian", {"width": 0.65})
    )
    amplitude: Optional[float] = None
    c_cfl: float = 0.5
    dt: Optional[float] = None
    dt_relative: float = 0.05
    dt_initial: float = 1e-3
    dt_max: Optional[float] = None
    sample_t0: float = 0.01
    samples_per_octave: int = 4
    sample_times: Optional[Tuple[float, ...]] = None
    sigma: float = 2.5
    q: Optional[float] = None
    nonlinear: bool = True
    rescale: bool = True
    dump_dir: str = "output/dumps"

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 2.0:
            raise ValueError(f"SimConfig: alpha must lie in (0, 2], got {self.alpha}")
        if self.q is None:
            self.q = 4.0 / self.alpha
        if not self.q > 2.0 / self.alpha:
            raise ValueError(f"SimConfig: q must exceed 2/alpha = {2.0 / self.alpha:.4g}, got {self.q}")
        if not self.sigma > 2.0:
            raise ValueError(f"SimConfig: sigma must exceed 2, got {self.sigma}")
        if self.amplitude is not None and not self.amplitude > 0.0:
            raise ValueError(f"SimConfig: amplitude must be positive, got {self.amplitude}")
        if self.t_end < 0.0:
            raise ValueError(f"SimConfig: t_end must be nonnegative, got {self.t_end}")
        if not self.c_cfl > 0.0:
            raise ValueError(f"SimConfig: c_cfl must be positive, got {self.c_cfl}")


@dataclass
class DecaySample:
    """Diagnostics of one trajectory sample."""
    t: float
    mass: float
    linf: float
    l2: float
    sobolev: float
    moment_q: float
    residual_R: float
    contamination: float
    box_length: float = 0.0
    flags: Tuple[str, ...] = ()


@dataclass
class SimState:
    """Evolving solution. ``step`` returns new states; fields are never mutated."""
    t: float
    theta: Field
    step_count: int = 0
    doublings: int = 0
    trailing_mass: float = 0.0
    diagnostics: List[DecaySample] = field(default_factory=list)

    @property
    def grid(self) -> GridSpec:
        return self.theta.grid


@dataclass
class RateFit:
    """Least-squares rate in transformed coordinates.

    ``model='power'``: ``y = prefactor * (t + shift)**exponent``.
    ``model='log-power'``: ``y = prefactor * log(2 + t)**exponent``.
    """
    model: str
    exponent: float
    prefactor: float
    rms_residual: float
    ci_low: float
    ci_high: float
    n_samples: int
    t_min: float
    t_max: float
    shift: float = 0.0


@dataclass
class Verdict:
    """PASS/FAIL outcome of one check, with the threshold and tolerance it used."""
    name: str
    passed: bool
    measured: float
    threshold: float
    tolerance: float
    detail: str = ""


@dataclass
class DecayReport:
    """Time series of per-sample norms plus fitted rates and verdicts."""
    alpha: float
    samples: List[DecaySample] = field(default_factory=list)
    fits: Dict[str, RateFit] = field(default_factory=dict)
    predicted: Dict[str, float] = field(default_factory=dict)
    verdicts: List[Verdict] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)
    partial: bool = False
    flags: List[str] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples], dtype=float)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [[getattr(s, c) for c in DECAY_COLUMNS] for s in self.samples],
            columns=DECAY_COLUMNS,
        )

    @property
    def all_passed(self) -> bool:
        return all(v.passed for v in self.verdicts)


@dataclass(frozen=True)
class EnsembleSpec:
    """Random mean-zero trigonometric polynomials on a box of side ``box_length``.

    Member ``i`` draws its coefficients from ``default_rng([seed, i])`` for the
    integer modes with ``k_min <= |m| <= k_max`` and weights them by
    ``|m|**-slope``, so the same member is the same function on every grid.
    """
    seed: int
    count: int
    k_min: int = 1
    k_max: int = 8
    slope: float = 1.5
    box_length: float = 2.0 * np.pi

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError(f"EnsembleSpec: count must be positive, got {self.count}")
        if not 1 <= self.k_min <= self.k_max:
            raise ValueError(f"EnsembleSpec: need 1 <= k_min <= k_max, got {self.k_min}, {self.k_max}")


@dataclass
class ExperimentConfig:
    """Parsed experiment file. ``raw`` keeps the loaded mapping for the report echo."""
    kind: str
    seed: int = 0
    output_dir: str = "output"
    formats: Tuple[str, ...] = ("csv", "json")
    sim: Optional[SimConfig] = None
    kernel: Dict[str, Any] = field(default_factory=dict)
    inequality: Dict[str, Any] = field(default_factory=dict)
    duhamel: Dict[str, Any] = field(default_factory=dict)
    tolerances: Dict[str, float] = field(default_factory=dict)
    sweep: Dict[str, List[Any]] = field(default_factory=dict)
    jobs: int = 1
    raw: Dict[str, Any] = field(default_factory=dict)


@dataclass
class CheckResult:
    """One verification experiment: the series it measured, the fit and the verdict."""
    name: str
    times: List[float]
    values: List[float]
    fit: Optional[RateFit]
    predicted: float
    verdict: Verdict
    flags: List[str] = field(default_factory=list)
    summary: Dict[str, float] = field(default_factory=dict)


@dataclass
class EnsembleResult:
    """Per-member values of one inequality test plus its summary statistics."""
    name: str
    params: Dict[str, Any]
    member_ids: List[int]
    values: List[float]
    summary: Dict[str, float] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"member_id": self.member_ids, "value": self.values})


@dataclass
class ExperimentResult:
    """Everything one experiment produced; report writers serialise it as is."""
    kind: str
    verdicts: List[Verdict] = field(default_factory=list)
    report: Optional[DecayReport] = None
    checks: List[CheckResult] = field(default_factory=list)
    ensembles: List[EnsembleResult] = field(default_factory=list)
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)
    partial: bool = False
    flags: List[str] = field(default_factory=list)

    @property
    def failures(self) -> List[Verdict]:
        return [v for v in self.verdicts if not v.passed]

    @property
    def passed(self) -> bool:
        return not self.partial and not self.failures
