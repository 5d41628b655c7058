import numpy as np
import pytest

from src.analysis.diagnostics import (
    kernel_trajectory, kernel_verify_checks, linear_lemma_check, lp_decay_check, mass_check,
    moment_growth_check, nonnegativity_check, residual_decay_check, sobolev_decay_check, theorem1_power,
    theorem1_residual,
)
from src.core.errors import ExponentError, InsufficientDataError
from src.models.datatypes import DecaySample, GridSpec
from src.providers.initial_data import make_initial_data

TIMES = np.geomspace(1.0, 100.0, 17)


@pytest.fixture(scope="module", params=[1.0, 1.5])
def control(request):
    alpha = request.param
    return alpha, kernel_trajectory(alpha, TIMES)


def test_theorem1_power():
    assert theorem1_power(1.0) == 1.5
    assert theorem1_power(0.5) == 0.5
    assert theorem1_power(1.5) == 0.5


def test_moment_growth_of_the_kernel(control):
    alpha, states = control
    check = moment_growth_check(states, alpha, 4.0 / alpha, shift=0.0)
    assert check.fit.exponent == pytest.approx(0.5, abs=1e-6)
    assert check.predicted == pytest.approx(0.5)
    assert check.verdict.passed


def test_linf_decay_of_the_kernel(control):
    alpha, states = control
    check = lp_decay_check(states, alpha, np.inf, decades=2.0, shift=0.0)
    assert check.name == "linf_decay"
    assert check.fit.exponent == pytest.approx(-2.0 / alpha, abs=1e-6)
    assert check.verdict.passed


def test_sobolev_decay_of_the_kernel(control):
    alpha, states = control
    check = sobolev_decay_check(states, alpha, 2.5, decades=2.0, shift=0.0)
    assert check.fit.exponent == pytest.approx(-3.5 / alpha, abs=1e-6)
    assert check.verdict.passed


def test_theorem1_residual_vanishes_on_the_kernel(control):
    alpha, states = control
    check = theorem1_residual(states, alpha)
    assert check.verdict.passed
    assert check.fit is None
    assert check.predicted == theorem1_power(alpha)


def test_mass_and_sign_of_the_kernel(control):
    alpha, states = control
    assert mass_check(states).passed
    assert nonnegativity_check(states).passed


def test_exponent_guards(control):
    alpha, states = control
    with pytest.raises(ExponentError):
        moment_growth_check(states, alpha, 2.0 / alpha)
    with pytest.raises(ExponentError):
        residual_decay_check(states, states, alpha, p=0.5)


def test_residual_of_identical_runs_is_skipped(control):
    alpha, states = control
    # all residuals vanish, so no positive sample is left to fit
    with pytest.raises(InsufficientDataError):
        residual_decay_check(states, states, alpha)


def test_mismatched_trajectories(control):
    alpha, states = control
    with pytest.raises(ValueError):
        residual_decay_check(states, list(reversed(states)), alpha)


def test_fit_needs_enough_samples():
    states = kernel_trajectory(1.0, [1.0, 2.0, 4.0])
    with pytest.raises(InsufficientDataError):
        moment_growth_check(states, 1.0, 4.0)


@pytest.mark.parametrize("family,params", [
    ("radial_gaussian", {"width": 0.5}),
    ("shifted_gaussian", {"width": 0.5, "shift": [0.5, 0.0]}),
])
def test_linear_lemma_at_alpha_two(family, params):
    theta0 = make_initial_data(family, params, GridSpec(128, 32.0), amplitude=1.0)
    check = linear_lemma_check(theta0, 2.0, TIMES)
    assert check.verdict.passed
    assert check.fit.exponent <= 0.05
    assert np.all(np.isfinite(check.values))


@pytest.mark.parametrize("alpha", [1.0, 2.0])
def test_kernel_battery_passes(alpha):
    verdicts = kernel_verify_checks(alpha, GridSpec(256, 32.0))
    names = [v.name for v in verdicts]
    assert "kernel_closed_form" in names
    assert any(n.startswith("kernel_tail") for n in names) == (alpha < 2.0)
    failed = [v for v in verdicts if not v.passed]
    assert not failed, failed


def test_default_rate_windows_span_a_decade(control):
    alpha, states = control
    check = lp_decay_check(states, alpha, np.inf, shift=0.0)
    assert check.fit.n_samples == 9
    assert check.fit.exponent == pytest.approx(-2.0 / alpha, abs=1e-6)


def test_moment_growth_default_window_stays_near_the_rate(control):
    alpha, states = control
    check = moment_growth_check(states, alpha, 4.0 / alpha)
    assert check.verdict.passed
    assert check.fit.exponent == pytest.approx(0.5, abs=0.03)
    # over two decades the (1 + t) shift inflates the slope
    assert moment_growth_check(states, alpha, 4.0 / alpha, decades=2.0).fit.exponent > check.fit.exponent


def _samples(times, moments, contaminated=()):
    return [
        DecaySample(t=t, mass=1.0, linf=1.0, l2=1.0, sobolev=1.0, moment_q=m, residual_R=0.0,
                    contamination=0.5 if t in contaminated else 0.0,
                    flags=("CONTAMINATED",) if t in contaminated else ())
        for t, m in zip(times, moments)
    ]


def test_contaminated_samples_leave_the_fit():
    moments = TIMES ** 0.5
    moments[[14, 16]] *= 10.0
    samples = _samples(TIMES, moments, contaminated=(TIMES[14], TIMES[16]))
    check = moment_growth_check(samples, 1.0, 4.0, decades=2.0, shift=0.0)
    assert check.fit.exponent == pytest.approx(0.5, abs=1e-9)
    assert check.fit.n_samples == 15
    assert "CONTAMINATED" in check.flags


def test_fully_contaminated_window_cannot_be_fitted():
    samples = _samples(TIMES, TIMES ** 0.5, contaminated=tuple(TIMES[6:]))
    with pytest.raises(InsufficientDataError):
        moment_growth_check(samples, 1.0, 4.0, shift=0.0)


@pytest.mark.slow
@pytest.mark.parametrize("alpha", [0.5, 0.7])
def test_kernel_battery_below_alpha_one(alpha):
    verdicts = kernel_verify_checks(alpha, GridSpec(256, 32.0))
    names = [v.name for v in verdicts]
    assert "kernel_closed_form" not in names
    assert {"kernel_route_agreement", "kernel_scaling_t2", "kernel_scaling_t8"} <= set(names)
    failed = [v for v in verdicts if not v.passed]
    assert not failed, failed
