from dataclasses import replace

import numpy as np
import pytest

from src.analysis.diagnostics import nonnegativity_check
from src.core.errors import CFLViolationError
from src.models.datatypes import Field, GridSpec, InitialDataSpec, KernelSpec, SimConfig, SimState
from src.numerics import spectral
from src.numerics.kernel import apply_semigroup, kernel_on_grid
from src.numerics.solver import (
    choose_dt, duhamel_residual, initial_field, integrate, picard_iterate, picard_sequence, product_weights,
    rescale_box, rescale_history, run_trajectory, sample_schedule,
)
from src.providers.initial_data import make_initial_data

GRID = GridSpec(128, 32.0)


def _config(**overrides):
    base = dict(alpha=1.0, grid=GRID, t_end=1.0, dump_dir="unused")
    base.update(overrides)
    return SimConfig(**base)


@pytest.fixture
def lopsided():
    return make_initial_data("double_gaussian", {"width": 0.65, "offset": 0.5}, GRID, amplitude=0.01)


def test_schedule_without_samples():
    assert sample_schedule(_config(t_end=0.0)) == [0.0]


def test_geometric_schedule():
    times = sample_schedule(_config(t_end=0.16, sample_t0=0.01, samples_per_octave=4))
    assert len(times) == 18
    assert times[0] == 0.0
    assert times[-1] == pytest.approx(0.16, rel=1e-14)
    assert np.all(np.diff(times) > 0)


def test_explicit_schedule_ends_at_t_end():
    times = sample_schedule(_config(t_end=2.0, sample_times=(0.5, 1.0, 3.0)))
    assert times == [0.0, 0.5, 1.0, 2.0]


def test_fixed_step_above_cfl_limit():
    with pytest.raises(CFLViolationError):
        choose_dt(0.0, 1.0, 1.0, GRID, _config(dt=1.0))


def test_adaptive_step_respects_next_sample():
    config = _config()
    assert choose_dt(0.0, 1.0, 0.0, GRID, config) == config.dt_initial
    assert choose_dt(0.5, 0.51, 0.0, GRID, config) == pytest.approx(0.01)


def test_linear_run_is_the_semigroup(gaussian):
    config = _config(nonlinear=False, rescale=False)
    final = run_trajectory(gaussian, config, diagnostics=False)[-1]
    expected = spectral.as_spectral(apply_semigroup(gaussian, 1.0, 1.0))
    assert final.t == 1.0
    assert np.allclose(spectral.as_spectral(final.theta), expected, rtol=0.0, atol=1e-12 * np.abs(expected).max())


def test_nonlinear_run_conserves_mass():
    config = _config(t_end=0.5, initial_data=InitialDataSpec("double_gaussian", {"width": 0.65, "offset": 0.5}))
    trajectory, report = integrate(config)
    masses = np.array([s.mass for s in report.samples])
    assert np.max(np.abs(masses - masses[0])) <= 1e-12 * masses[0]
    assert "MASS_DRIFT" not in report.flags
    assert len(trajectory) == len(sample_schedule(config))


def test_integrate_without_samples():
    trajectory, report = integrate(_config(t_end=0.0))
    assert len(trajectory) == 1
    assert [s.t for s in report.samples] == [0.0]
    assert not report.partial


def test_rescale_doubles_box_and_keeps_mass(gaussian):
    mass0 = spectral.mass(gaussian)
    state = SimState(t=1.0, theta=spectral.to_spectral(gaussian))
    moved = rescale_box(state, 1.0, mass0)
    assert moved.grid.box_length == 64.0
    assert moved.grid.n == 128
    assert moved.doublings == 1
    assert moved.trailing_mass >= 0.0
    assert spectral.mass(moved.theta) == pytest.approx(mass0, rel=1e-12)


def test_product_weights_limits():
    w_a, w_b = product_weights(np.array([0.0, 1e-8]))
    assert np.allclose(w_a, 0.5) and np.allclose(w_b, 0.5)
    below_a, below_b = product_weights(np.array([0.1 * (1 - 1e-12)]))
    above_a, above_b = product_weights(np.array([0.1]))
    assert below_a[0] == pytest.approx(above_a[0], rel=1e-10)
    assert below_b[0] == pytest.approx(above_b[0], rel=1e-10)
    big_a, big_b = product_weights(np.array([1e6]))
    assert big_b[0] == pytest.approx(1e-6, rel=1e-5)
    assert big_a[0] == pytest.approx(1e-12, rel=1e-5)


def test_picard_zero_is_the_linear_flow(gaussian):
    first = picard_iterate(gaussian, 1.0, 0.5, 0)
    expected = spectral.as_physical(spectral.to_physical(apply_semigroup(gaussian, 1.0, 0.5)))
    assert np.allclose(spectral.as_physical(first), expected, rtol=0.0, atol=1e-14)


def test_picard_rejects_bad_arguments(gaussian):
    with pytest.raises(ValueError):
        picard_sequence(gaussian, 1.0, 0.5, 5)
    with pytest.raises(ValueError):
        picard_sequence(gaussian, 1.0, 0.0, 1)


def test_picard_iterates_approach_the_solver(lopsided):
    iterates = picard_sequence(lopsided, 1.0, 0.5, 3, n_steps=64)
    assert len(iterates) == 4
    final = run_trajectory(lopsided, _config(t_end=0.5, rescale=False), diagnostics=False)[-1]
    gap = spectral.l2_norm(spectral.from_spectral(
        GRID, spectral.as_spectral(iterates[-1]) - spectral.as_spectral(final.theta)))
    assert gap <= 1e-5 * spectral.l2_norm(final.theta)


def test_duhamel_residual_is_small(lopsided):
    config = _config(sample_t0=0.125, samples_per_octave=1, rescale=False)
    trajectory = run_trajectory(lopsided, config, diagnostics=False)
    assert duhamel_residual(trajectory, config) < 1e-4


def test_duhamel_residual_sees_a_perturbed_sample(lopsided):
    config = _config(sample_t0=0.125, samples_per_octave=1, rescale=False)
    trajectory = run_trajectory(lopsided, config, diagnostics=False)
    last = trajectory[-1]
    bumped = spectral.from_spectral(GRID, 1.01 * spectral.as_spectral(last.theta))
    trajectory[-1] = SimState(t=last.t, theta=bumped, step_count=last.step_count)
    assert duhamel_residual(trajectory, config) > 1e-3


@pytest.fixture
def strong():
    return make_initial_data("double_gaussian", {"width": 0.65, "offset": 0.5}, GRID, amplitude=0.5)


def _profile_state(deviation: np.ndarray) -> SimState:
    profile = spectral.as_physical(kernel_on_grid(KernelSpec(1.0, 1.0), GRID, strict=False, warn=False))
    return SimState(t=1.0, theta=spectral.to_spectral(Field.from_physical(GRID, profile + deviation)))


def _deviation(state: SimState) -> np.ndarray:
    profile = spectral.as_physical(kernel_on_grid(KernelSpec(1.0, state.t), state.grid, strict=False, warn=False))
    return spectral.as_physical(spectral.to_physical(state.theta)) - profile


def test_rescale_drops_content_the_new_grid_cannot_hold():
    x1, x2 = GRID.mesh
    ripple = 1e-3 * np.exp(-(x1 ** 2 + x2 ** 2) / 9.0) * np.cos(2.0 * np.pi * 48.0 * x1 / 32.0)
    moved = rescale_box(_profile_state(ripple), 1.0, 1.0)
    assert np.abs(_deviation(moved)).max() <= 1e-8 * np.abs(ripple).max()


def test_rescale_keeps_smooth_deviations_in_place():
    def dipole(grid):
        x1, x2 = grid.mesh
        return 1e-3 * (np.exp(-((x1 - 1.0) ** 2 + x2 ** 2) / 4.0) - np.exp(-((x1 + 1.0) ** 2 + x2 ** 2) / 4.0))

    moved = rescale_box(_profile_state(dipole(GRID)), 1.0, 1.0)
    assert np.allclose(_deviation(moved), dipole(moved.grid), rtol=0.0, atol=1e-14)
    assert spectral.mass(moved.theta) == pytest.approx(1.0, rel=1e-12)


def _final_spectrum(theta0, dt):
    config = _config(t_end=0.5, dt=dt, sample_times=(0.5,), rescale=False)
    return spectral.as_spectral(run_trajectory(theta0, config, diagnostics=False)[-1].theta)


def test_fourth_order_in_time(strong):
    coarse, mid, fine = (_final_spectrum(strong, dt) for dt in (0.1, 0.05, 0.025))
    ratio = np.linalg.norm(coarse - mid) / np.linalg.norm(mid - fine)
    assert 9.0 <= ratio <= 24.0


def test_duhamel_residual_shrinks_with_the_step(strong):
    residuals = []
    for dt in (0.05, 0.025):
        config = _config(sample_t0=0.125, samples_per_octave=1, rescale=False, dt=dt)
        residuals.append(duhamel_residual(run_trajectory(strong, config, diagnostics=False), config))
    assert 0.0 < residuals[1] <= residuals[0] / 6.0


@pytest.mark.slow
@pytest.mark.parametrize("alpha", [0.5, 0.8, 1.0])
@pytest.mark.parametrize("family,params", [
    ("radial_gaussian", {"width": 0.65}),
    ("double_gaussian", {"width": 0.65, "offset": 0.5}),
    ("bandlimited_bump", {"width": 0.65, "seed": 3}),
])
def test_solution_stays_nonnegative(alpha, family, params):
    config = SimConfig(alpha=alpha, grid=GridSpec(256, 32.0), t_end=1.0, dump_dir="unused",
                       initial_data=InitialDataSpec(family, params))
    trajectory, report = integrate(config)
    assert nonnegativity_check(trajectory).passed
    assert "NEGATIVE" not in report.flags


@pytest.mark.slow
@pytest.mark.parametrize("alpha", [0.5, 1.0])
def test_radial_data_follows_the_linear_flow(alpha):
    config = SimConfig(alpha=alpha, grid=GridSpec(256, 32.0), t_end=10.0, dump_dir="unused")
    theta0 = initial_field(config)
    nonlinear = run_trajectory(theta0, config, diagnostics=False)
    linear = run_trajectory(theta0, replace(config, nonlinear=False), diagnostics=False,
                            rescale_times=rescale_history(nonlinear))
    assert nonlinear[-1].doublings > 0
    for a, b in zip(nonlinear, linear):
        assert a.grid == b.grid
        gap = np.abs(spectral.as_physical(spectral.to_physical(a.theta))
                     - spectral.as_physical(spectral.to_physical(b.theta))).max()
        assert gap <= 1e-9 * spectral.sup_norm(b.theta)
