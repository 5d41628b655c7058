"""Time integration of the dissipative QG equation on a periodic box.

    d_t theta + (-Delta)**(alpha/2) theta + div(theta u) = 0,    u = (-R2 theta, R1 theta)

The linear part is integrated exactly by the factor ``exp(-dt |k|**alpha)``
(integrating-factor RK4); the flux ``theta u`` is formed pseudo-spectrally
with 2/3 dealiasing, so the zero mode of the nonlinear term is identically 0
and the discrete mass is conserved.

Long runs track the self-similar spreading by doubling the box whenever the
kernel scale ``t**(1/alpha)`` is about to exceed ``L/32`` (see ``rescale_box``), which keeps
the kernel tail at ``3L/8`` below the contamination limit for every ``alpha``.
"""

from dataclasses import asdict, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.analysis.norms import CONTAMINATION_RADIUS
from src.analysis.samples import sample_diagnostics
from src.core.errors import (
    CFLViolationError, InsufficientDataError, PicardDivergenceError, QGDecayError, SolverDivergedError,
)
from src.core.logger import logger
from src.models.datatypes import DecayReport, Field, GridSpec, KernelSpec, SimConfig, SimState
from src.numerics import spectral
from src.numerics.checkpoint import write_checkpoint
from src.numerics.kernel import kernel_on_grid, kernel_peak
from src.providers.initial_data import make_initial_data

# Relative mass drift and negativity (vs ||theta_0||_inf) tolerated before a sample is flagged.
MASS_DRIFT_LIMIT = 1e-11
NEGATIVITY_LIMIT = 1e-8
# Boxes are doubled once the kernel scale of the next sample would pass L / RESCALE_FRACTION.
RESCALE_FRACTION = 32.0
PICARD_MAX_ITERATES = 4


class IntegratingFactorRK4:
    """Lawson (integrating-factor) RK4 for ``v' = -|k|**alpha v + N(v)``.

    Args:
        alpha: Dissipation order.
        nonlinear: With False the step is the exact linear flow.
    """

    def __init__(self, alpha: float, nonlinear: bool = True) -> None:
        self.alpha = alpha
        self.nonlinear = nonlinear

    def decay_factor(self, grid: GridSpec, h: float) -> np.ndarray:
        return np.exp(-h * grid.kabs ** self.alpha)

    def nonlinear_term(self, theta_hat: np.ndarray, grid: GridSpec) -> Tuple[np.ndarray, float]:
        """Spectrum of ``-div(theta u)`` and ``max |u|`` on the grid."""
        if not self.nonlinear:
            return np.zeros_like(theta_hat), 0.0
        mask = grid.dealias_mask
        trimmed = theta_hat * mask
        u1_hat, u2_hat = spectral.velocity_spectra(trimmed, grid)
        theta = spectral.ifft2_real(trimmed)
        u1 = spectral.ifft2_real(u1_hat)
        u2 = spectral.ifft2_real(u2_hat)
        d1, d2 = spectral.derivative_symbols(grid)
        flux = d1 * spectral.fft2(theta * u1) + d2 * spectral.fft2(theta * u2)
        umax = float(np.sqrt(np.max(u1 * u1 + u2 * u2)))
        return -flux * mask, umax

    def advance(
        self,
        theta_hat: np.ndarray,
        h: float,
        grid: GridSpec,
        k1: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """One step of size ``h``; ``k1`` may carry an already evaluated ``N(theta_hat)``."""
        full = self.decay_factor(grid, h)
        if not self.nonlinear:
            return full * theta_hat
        half = self.decay_factor(grid, 0.5 * h)
        if k1 is None:
            k1, _ = self.nonlinear_term(theta_hat, grid)
        k2, _ = self.nonlinear_term(half * (theta_hat + 0.5 * h * k1), grid)
        k3, _ = self.nonlinear_term(half * theta_hat + 0.5 * h * k2, grid)
        k4, _ = self.nonlinear_term(full * theta_hat + h * half * k3, grid)
        return full * theta_hat + h / 6.0 * (full * k1 + 2.0 * half * (k2 + k3) + k4)

    def step(
        self,
        state: SimState,
        dt: float,
        c_cfl: float,
        dump_dir: Optional[str] = None,
        stage: Optional[Tuple[np.ndarray, float]] = None,
    ) -> SimState:
        """Advance ``state`` by ``dt``.

        ``stage`` is ``nonlinear_term`` of the state when the caller already has it.

        Raises:
            CFLViolationError: ``dt > c_cfl * dx / max|u|``.
            SolverDivergedError: Non-finite values after the step; the last good
                state is dumped to ``dump_dir`` when given.
        """
        grid = state.grid
        theta_hat = spectral.as_spectral(state.theta)
        k1, umax = stage if stage is not None else self.nonlinear_term(theta_hat, grid)
        limit = cfl_limit(grid, umax, c_cfl)
        if dt > limit * (1.0 + 1e-12):
            raise CFLViolationError(
                f"step: dt={dt:.4g} exceeds the CFL limit {limit:.4g} (max|u|={umax:.4g}, dx={grid.dx:.4g})"
            )
        new_hat = self.advance(theta_hat, dt, grid, k1=k1)
        if not np.all(np.isfinite(new_hat)):
            dump = None
            if dump_dir is not None:
                dump = str(write_checkpoint(state.theta, state.t, self.alpha,
                                            Path(dump_dir) / f"diverged_t{state.t:.6e}.bin"))
            logger.error(f"step: non-finite state at t={state.t + dt:.6g} after {state.step_count} steps")
            raise SolverDivergedError(f"step: non-finite values at t={state.t + dt:.6g}", dump)
        return replace(
            state,
            t=state.t + dt,
            theta=spectral.to_physical(spectral.from_spectral(grid, new_hat)),
            step_count=state.step_count + 1,
        )


def cfl_limit(grid: GridSpec, umax: float, c_cfl: float) -> float:
    return np.inf if umax <= 0.0 else c_cfl * grid.dx / umax


def step(state: SimState, dt: float, config: SimConfig) -> SimState:
    """Advance ``state`` by one integrating-factor RK4 step of size ``dt``."""
    stepper = IntegratingFactorRK4(config.alpha, config.nonlinear)
    return stepper.step(state, dt, config.c_cfl, config.dump_dir)


# ── schedule ──────────────────────────────────────────────────────────────────

def sample_schedule(config: SimConfig) -> List[float]:
    """Sample times: 0, then ``t0 * 2**(k/m)`` up to ``t_end``, then ``t_end`` itself."""
    if config.t_end == 0.0:
        return [0.0]
    if config.sample_times is not None:
        times = sorted({float(t) for t in config.sample_times if 0.0 < t <= config.t_end})
    else:
        count = int(np.floor(config.samples_per_octave * np.log2(config.t_end / config.sample_t0) + 1e-9))
        times = [config.sample_t0 * 2.0 ** (k / config.samples_per_octave) for k in range(max(count, -1) + 1)]
    if not times or times[-1] < config.t_end * (1.0 - 1e-12):
        times.append(float(config.t_end))
    return [0.0] + times


def choose_dt(t: float, t_next: float, umax: float, grid: GridSpec, config: SimConfig) -> float:
    """Adaptive step: relative to ``t``, capped by CFL, ``dt_max`` and the next sample."""
    remaining = t_next - t
    if config.dt is not None:
        limit = cfl_limit(grid, umax, config.c_cfl)
        if config.dt > limit * (1.0 + 1e-12):
            raise CFLViolationError(f"choose_dt: fixed dt={config.dt:.4g} exceeds the CFL limit {limit:.4g}")
        return min(config.dt, remaining)
    dt = config.dt_initial if t == 0.0 else config.dt_relative * t
    dt = min(dt, cfl_limit(grid, umax, config.c_cfl), remaining)
    if config.dt_max is not None:
        dt = min(dt, config.dt_max)
    return dt


# ── box rescaling ─────────────────────────────────────────────────────────────

def rescale_box(state: SimState, alpha: float, mass0: float) -> SimState:
    """Move the state onto a box of twice the side with the same ``n``.

    The deviation ``v = theta - M G(t)`` (old periodised kernel) is cut to the
    band ``|m| < n/4`` the new grid can hold and then subsampled on even nodes
    into the centre of the new box, where old and new nodes coincide, which is
    exact for band-limited content. The profile ``M G(t)`` is re-synthesised
    on the new box. Both pieces keep their discrete mass, so the total mass
    changes only by round-off. The ``L1`` mass of ``v`` in
    the outer ring ``|x| > 3L/8`` is added to ``trailing_mass``.
    """
    old = state.grid
    new = old.doubled()
    n = old.n
    spec = KernelSpec(alpha, state.t)
    profile_old = spectral.as_physical(kernel_on_grid(spec, old, strict=False, warn=False))
    band = np.abs(old.mode_index) < n // 4
    v_hat = spectral.fft2(spectral.as_physical(state.theta) - mass0 * profile_old) * np.multiply.outer(band, band)
    v = spectral.ifft2_real(v_hat)
    trailing = old.cell_area * float(np.abs(v[old.radius > CONTAMINATION_RADIUS * old.box_length]).sum())

    moved = np.zeros((n, n))
    moved[n // 4: 3 * n // 4, n // 4: 3 * n // 4] = v[0::2, 0::2]
    profile_new = spectral.as_physical(kernel_on_grid(spec, new, strict=False, warn=False))
    theta = Field.from_physical(new, moved + mass0 * profile_new)
    logger.info(
        f"rescale_box: t={state.t:.6g} L {old.box_length:.6g} -> {new.box_length:.6g}, "
        f"trailing mass {trailing:.3e}"
    )
    return replace(
        state,
        theta=spectral.to_spectral(theta),
        doublings=state.doublings + 1,
        trailing_mass=state.trailing_mass + trailing,
    )


def _needs_rescale(t_next: float, alpha: float, grid: GridSpec) -> bool:
    return t_next ** (1.0 / alpha) > grid.box_length / RESCALE_FRACTION


# ── trajectories ──────────────────────────────────────────────────────────────

def initial_field(config: SimConfig) -> Field:
    """Initial data of ``config``; the default amplitude is ``1e-2 * G_alpha(1, 0)``."""
    amplitude = config.amplitude
    if amplitude is None:
        amplitude = 1e-2 * kernel_peak(config.alpha, 1.0)
    return make_initial_data(config.initial_data.family, config.initial_data.params, config.grid, amplitude)


def run_trajectory(
    theta0: Field,
    config: SimConfig,
    diagnostics: bool = True,
    rescale_times: Optional[List[float]] = None,
) -> List[SimState]:
    """Integrate from ``theta0`` and return the states at the sample times.

    Args:
        theta0: Initial field (its grid overrides ``config.grid``).
        config: Solver parameters.
        diagnostics: Attach a DecaySample to every sampled state.
        rescale_times: Force box doublings at exactly these sample times
            instead of the automatic rule (used to pair a linear companion
            run with a nonlinear one).

    Raises:
        CFLViolationError, SolverDivergedError: propagated from ``step``.
    """
    stepper = IntegratingFactorRK4(config.alpha, config.nonlinear)
    times = sample_schedule(config)
    mass0 = spectral.mass(theta0)
    peak0 = spectral.sup_norm(theta0)
    q = float(config.q if config.q is not None else 4.0 / config.alpha)

    state = SimState(t=0.0, theta=spectral.to_spectral(theta0))
    samples = []
    trajectory: List[SimState] = []
    for k, t_sample in enumerate(times):
        while t_sample - state.t > 1e-12 * max(t_sample, 1.0):
            stage = stepper.nonlinear_term(spectral.as_spectral(state.theta), state.grid)
            dt = choose_dt(state.t, t_sample, stage[1], state.grid, config)
            state = stepper.step(state, dt, config.c_cfl, config.dump_dir, stage=stage)
        state = replace(state, t=t_sample)

        monitor_flags = _monitor(state, mass0, peak0)
        if diagnostics:
            sample = sample_diagnostics(state, config.alpha, config.sigma, q, mass0)
            sample.flags = sample.flags + tuple(monitor_flags)
            samples.append(sample)
            state = replace(state, diagnostics=list(samples))
        trajectory.append(state)

        if k + 1 < len(times) and config.rescale:
            if rescale_times is not None:
                count = sum(abs(t_sample - r) <= 1e-12 * max(r, 1.0) for r in rescale_times)
            else:
                count = 0
                grid = state.grid
                while _needs_rescale(times[k + 1], config.alpha, grid):
                    grid = grid.doubled()
                    count += 1
            for _ in range(count):
                state = rescale_box(state, config.alpha, mass0)
    return trajectory


def rescale_history(trajectory: List[SimState]) -> List[float]:
    """Sample times after which the box was doubled, repeated once per doubling."""
    return [a.t for a, b in zip(trajectory, trajectory[1:]) for _ in range(b.doublings - a.doublings)]


def _monitor(state: SimState, mass0: float, peak0: float) -> List[str]:
    flags = []
    drift = abs(spectral.mass(state.theta) - mass0) / abs(mass0) if mass0 else 0.0
    if drift > MASS_DRIFT_LIMIT:
        logger.warning(f"integrate: MASS_DRIFT {drift:.3e} at t={state.t:.6g}")
        flags.append("MASS_DRIFT")
    low = float(spectral.as_physical(state.theta).min())
    if peak0 > 0 and low < -NEGATIVITY_LIMIT * peak0:
        logger.warning(f"integrate: NEGATIVE min theta {low:.3e} at t={state.t:.6g}")
        flags.append("NEGATIVE")
    return flags


def sim_config_dict(config: SimConfig) -> Dict[str, Any]:
    """JSON-friendly echo of a SimConfig."""
    out = asdict(config)
    out["grid"] = {"n": config.grid.n, "box_length": config.grid.box_length}
    if config.sample_times is not None:
        out["sample_times"] = list(config.sample_times)
    return out


def integrate(config: SimConfig, allow_partial: bool = False) -> Tuple[List[SimState], DecayReport]:
    """Run ``config`` from its initial data.

    Args:
        config: Solver parameters.
        allow_partial: On a solver failure, return what was sampled so far with
            ``report.partial`` set instead of raising.

    Returns:
        The sampled trajectory and a DecayReport holding the per-sample
        diagnostics (fits and verdicts are added by the diagnostics checks).
    """
    theta0 = initial_field(config)
    report = DecayReport(alpha=config.alpha, config=sim_config_dict(config))
    logger.info(
        f"integrate: alpha={config.alpha}, n={config.grid.n}, L={config.grid.box_length}, "
        f"t_end={config.t_end}, nonlinear={config.nonlinear}"
    )
    try:
        trajectory = run_trajectory(theta0, config)
    except QGDecayError as exc:
        if not allow_partial:
            raise
        logger.error(f"integrate: run aborted: {exc}", exc_info=True)
        report.partial = True
        report.flags.append(f"ABORTED: {exc}")
        return [], report

    final = trajectory[-1]
    report.samples = list(final.diagnostics)
    flags = sorted({f for s in report.samples for f in s.flags})
    report.flags.extend(flags)
    logger.info(
        f"integrate: {len(trajectory)} samples, {final.step_count} steps, "
        f"{final.doublings} box doublings, trailing mass {final.trailing_mass:.3e}"
    )
    return trajectory, report


# ── mild-solution checks ──────────────────────────────────────────────────────

def _graded_nodes(t: float, n_quad: int, n_panels: int, grading: float) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on panels of ``[0, t]`` shrinking geometrically toward ``t``."""
    edges = np.concatenate([t * (1.0 - grading ** np.arange(n_panels)), [t]])
    x, w = np.polynomial.legendre.leggauss(n_quad)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (b + a)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


def duhamel_residual(
    trajectory: List[SimState],
    config: SimConfig,
    n_quad: int = 8,
    n_panels: int = 20,
    grading: float = 0.5,
) -> float:
    """Max relative ``L2`` mismatch between the trajectory and its mild-solution form.

    For every sample ``t > 0`` on the initial box,
    ``E(t) theta_0 + int_0^t E(t - s) N(theta(s)) ds`` is evaluated by graded
    Gauss-Legendre quadrature; ``theta`` at the nodes comes from stepping the
    same integrator forward from the nearest earlier stored sample.

    Raises:
        InsufficientDataError: no sample with ``t > 0`` on the initial box.
    """
    usable = [s for s in trajectory if s.doublings == 0]
    targets = [s for s in usable if s.t > 0.0]
    if not usable or usable[0].t != 0.0 or not targets:
        raise InsufficientDataError("duhamel_residual: need the initial state and a later sample on the first box")

    stepper = IntegratingFactorRK4(config.alpha, config.nonlinear)
    grid = usable[0].grid
    theta0_hat = spectral.as_spectral(usable[0].theta)
    quad = {s.t: _graded_nodes(s.t, n_quad, n_panels, grading) for s in targets}
    all_nodes = np.unique(np.concatenate([nodes for nodes, _ in quad.values()]))
    node_terms = dict(zip(all_nodes, _nonlinear_at_nodes(usable, all_nodes, stepper, config)))

    worst = 0.0
    for s in targets:
        nodes, weights = quad[s.t]
        integral = np.zeros_like(theta0_hat)
        for node, w in zip(nodes, weights):
            integral += w * stepper.decay_factor(grid, s.t - node) * node_terms[node]
        mild = stepper.decay_factor(grid, s.t) * theta0_hat + integral
        diff = spectral.spectral_l2_norm(spectral.from_spectral(grid, spectral.as_spectral(s.theta) - mild))
        norm = spectral.spectral_l2_norm(s.theta)
        worst = max(worst, diff / norm if norm > 0 else diff)
    logger.info(f"duhamel_residual: max relative residual {worst:.3e} over {len(targets)} samples")
    return worst


def _nonlinear_at_nodes(
    stored: List[SimState],
    nodes: np.ndarray,
    stepper: IntegratingFactorRK4,
    config: SimConfig,
) -> List[np.ndarray]:
    """``N(theta(s))`` at sorted ``nodes``, marching from the latest stored sample before each node."""
    out = []
    stored_times = np.array([s.t for s in stored])
    state = stored[0]
    for node in nodes:
        latest = stored[int(np.searchsorted(stored_times, node, side="right")) - 1]
        if latest.t > state.t:
            state = latest
        while node - state.t > 1e-12 * max(node, 1.0):
            stage = stepper.nonlinear_term(spectral.as_spectral(state.theta), state.grid)
            dt = choose_dt(state.t, node, stage[1], state.grid, config)
            state = stepper.step(state, dt, config.c_cfl, stage=stage)
        out.append(stepper.nonlinear_term(spectral.as_spectral(state.theta), state.grid)[0])
    return out


def product_weights(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Weights of ``int_0^h exp(-lam (h - s)) N(s) ds`` for ``N`` linear on ``[0, h]``.

    With ``z = lam h`` the integral is ``h (w_a N(0) + w_b N(h))``; small ``z``
    uses the Taylor series to avoid cancellation.
    """
    z = np.asarray(z, dtype=float)
    small = z < 0.1
    zs = np.where(small, z, 0.0)
    w_a = np.zeros_like(z)
    w_b = np.zeros_like(z)
    fact = 1.0
    for j in range(12):
        fact *= j + 2
        term = (-zs) ** j / fact
        w_a += term * (j + 1)
        w_b += term
    zl = np.where(small, 1.0, z)
    em1 = np.expm1(-zl)
    w_a = np.where(small, w_a, (-em1 - zl * np.exp(-zl)) / zl ** 2)
    w_b = np.where(small, w_b, (zl + em1) / zl ** 2)
    return w_a, w_b


def picard_sequence(theta0: Field, alpha: float, t: float, k: int, n_steps: int = 64) -> List[Field]:
    """Picard iterates ``0..k`` of the mild-solution map, evaluated at time ``t``.

    Iterate 0 is the linear flow. Each further iterate integrates the
    nonlinear term of the previous one on a uniform mesh of ``[0, t]`` by
    exponential product integration (linear part exact, ``N`` piecewise linear).

    Raises:
        ValueError: ``k`` outside ``[0, 4]`` or ``t <= 0``.
        PicardDivergenceError: Successive differences grow.
    """
    if not 0 <= k <= PICARD_MAX_ITERATES:
        raise ValueError(f"picard_sequence: k must lie in [0, {PICARD_MAX_ITERATES}], got {k}")
    if not t > 0.0:
        raise ValueError(f"picard_sequence: t must be positive, got {t}")
    grid = theta0.grid
    stepper = IntegratingFactorRK4(alpha, nonlinear=True)
    h = t / n_steps
    lam = grid.kabs ** alpha
    decay_h = np.exp(-h * lam)
    w_a, w_b = product_weights(h * lam)
    mesh = np.arange(n_steps + 1) * h

    theta0_hat = spectral.as_spectral(theta0)
    linear = np.exp(-mesh[:, None, None] * lam[None, :, :]) * theta0_hat[None, :, :]
    current = linear
    finals = [spectral.from_spectral(grid, current[-1])]
    diffs: List[float] = []
    floor = 1e-12 * spectral.spectral_l2_norm(finals[0])
    for j in range(1, k + 1):
        terms = np.array([stepper.nonlinear_term(current[i], grid)[0] for i in range(n_steps + 1)])
        duhamel = np.zeros_like(current)
        for i in range(n_steps):
            duhamel[i + 1] = decay_h * duhamel[i] + h * (w_a * terms[i] + w_b * terms[i + 1])
        current = linear + duhamel
        finals.append(spectral.from_spectral(grid, current[-1]))
        diff = spectral.spectral_l2_norm(
            spectral.from_spectral(grid, current[-1] - spectral.as_spectral(finals[-2]))
        )
        if not np.isfinite(diff) or (diffs and diff > diffs[-1] and diff > floor):
            raise PicardDivergenceError(
                f"picard_sequence: iterate {j} difference {diff:.3e} after {diffs[-1] if diffs else float('nan'):.3e}"
            )
        diffs.append(diff)
        logger.debug(f"picard_sequence: iterate {j}, difference {diff:.3e}")
    return [spectral.to_physical(f) for f in finals]


def picard_iterate(theta0: Field, alpha: float, t: float, k: int, n_steps: int = 64) -> Field:
    """The ``k``-th Picard iterate at time ``t`` (0 is ``G_alpha(t) * theta0``)."""
    return picard_sequence(theta0, alpha, t, k, n_steps)[k]
