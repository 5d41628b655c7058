import numpy as np
import pytest
from scipy import special

from src.core.errors import ResolutionError, WindowError
from src.models.datatypes import GridSpec, KernelSpec
from src.numerics import spectral
from src.numerics.kernel import (
    apply_semigroup, kernel_closed_form, kernel_far_field, kernel_fourier_series, kernel_on_grid, kernel_peak,
    kernel_radial, kernel_table, kernel_truncation_bound, kernel_weighted_norm, scaling_check, tail_exponent,
)


def test_peak_values():
    assert kernel_peak(2.0, 1.0) == pytest.approx(1.0 / (4.0 * np.pi), rel=1e-14)
    assert kernel_peak(1.0, 1.0) == pytest.approx(1.0 / (2.0 * np.pi), rel=1e-14)
    assert kernel_peak(1.0, 8.0) == pytest.approx(kernel_peak(1.0, 1.0) / 64.0, rel=1e-14)


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec(2.5, 1.0)
    with pytest.raises(ValueError):
        KernelSpec(1.0, 0.0)
    with pytest.raises(ValueError):
        KernelSpec(1.0, 1.0, (2, 2))


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 2.0])
def test_grid_kernel_has_unit_mass(alpha, plane_grid):
    field = kernel_on_grid(KernelSpec(alpha, 1.0), plane_grid, warn=False)
    assert spectral.mass(field) == pytest.approx(1.0, abs=1e-12)


def test_gaussian_kernel_peak_on_grid(plane_grid):
    values = spectral.as_physical(kernel_on_grid(KernelSpec(2.0, 1.0), plane_grid))
    assert values[128, 128] == pytest.approx(1.0 / (4.0 * np.pi), rel=1e-10)
    assert values.min() > -1e-12


def test_free_space_kernel_matches_poisson(plane_grid):
    plane = spectral.as_physical(kernel_on_grid(KernelSpec(1.0, 1.0), plane_grid, periodic=False))
    inside = plane_grid.radius <= 8.0
    exact = kernel_closed_form(1.0, 1.0, plane_grid.radius[inside])
    assert np.max(np.abs(plane[inside] - exact) / exact) <= 1e-6


def test_periodic_kernel_differs_from_plane_by_images(plane_grid):
    periodic = spectral.as_physical(kernel_on_grid(KernelSpec(1.0, 1.0), plane_grid))
    plane = spectral.as_physical(kernel_on_grid(KernelSpec(1.0, 1.0), plane_grid, periodic=False))
    assert np.all(periodic[128, :] > plane[128, :])


def test_out_of_window_kernel_raises(plane_grid):
    with pytest.raises(ResolutionError):
        kernel_on_grid(KernelSpec(1.0, 1e-3), plane_grid)
    loose = kernel_on_grid(KernelSpec(1.0, 1e-3), plane_grid, strict=False, warn=False)
    assert spectral.mass(loose) == pytest.approx(1.0, abs=1e-12)


def test_semigroup_property(gaussian):
    twice = apply_semigroup(apply_semigroup(gaussian, 0.7, 0.3), 0.7, 0.5)
    once = apply_semigroup(gaussian, 0.7, 0.8)
    assert np.allclose(spectral.as_spectral(twice), spectral.as_spectral(once), rtol=1e-12, atol=1e-14)


def test_truncation_bound_shrinks_with_resolution():
    spec = KernelSpec(0.5, 1.0)
    coarse = kernel_truncation_bound(spec, GridSpec(64, 32.0))
    fine = kernel_truncation_bound(spec, GridSpec(256, 32.0))
    assert fine < coarse


@pytest.mark.parametrize("r", [0.0, 0.5, 1.0, 2.0])
def test_radial_route_gaussian(r):
    expected = np.exp(-r * r / 4.0) / (4.0 * np.pi)
    assert kernel_radial(KernelSpec(2.0, 1.0), r) == pytest.approx(expected, rel=1e-8)


@pytest.mark.parametrize("r", [0.0, 1.0, 3.0, 10.0])
def test_radial_route_poisson(r):
    expected = kernel_closed_form(1.0, 1.0, np.array(r))
    assert kernel_radial(KernelSpec(1.0, 1.0), r) == pytest.approx(float(expected), rel=1e-8)


def test_far_field_series_matches_poisson():
    r = np.array([20.0, 40.0, 80.0])
    assert np.allclose(kernel_far_field(1.0, 1.0, r), kernel_closed_form(1.0, 1.0, r), rtol=1e-10)


def test_far_field_vanishes_for_gaussian():
    assert np.all(kernel_far_field(2.0, 1.0, np.array([10.0, 30.0])) == 0.0)


@pytest.mark.parametrize("alpha", [0.5, 0.7, 1.0, 1.5])
@pytest.mark.parametrize("t", [2.0, 8.0])
def test_scaling_identity(alpha, t):
    radii = np.linspace(0.0, 4.0 * t ** (1.0 / alpha), 5)
    assert scaling_check(alpha, t, radii) <= 1e-7


def test_scaling_check_sees_a_wrong_exponent():
    radii = np.linspace(0.0, 4.0, 5)
    lhs = np.atleast_1d(kernel_radial(KernelSpec(1.0, 2.0), radii))
    wrong = 2.0 ** -1.5 * kernel_fourier_series(1.0, 1.0, radii / 2.0, np.zeros(5))
    assert np.max(np.abs(lhs - wrong)) / kernel_peak(1.0, 2.0) > 1e-2


def test_scaling_check_rejects_radii_off_the_box():
    with pytest.raises(ResolutionError):
        scaling_check(1.0, 2.0, [20.0])


def test_tail_exponents_poisson():
    assert tail_exponent(KernelSpec(1.0, 1.0)) == pytest.approx(-3.0, abs=0.05)
    assert tail_exponent(KernelSpec(1.0, 1.0, (1, 0))) == pytest.approx(-4.0, abs=0.1)


def test_tail_window_must_span_a_decade():
    with pytest.raises(WindowError):
        tail_exponent(KernelSpec(1.0, 1.0), r_min=10.0, r_max=50.0)


def test_weighted_norm_growth_models(plane_grid):
    log_growth = kernel_weighted_norm(KernelSpec(1.0, 1.0), 2.0, 2.0, 8.0, plane_grid)
    assert log_growth.growth_model == "log"
    assert log_growth.growth_exponent == pytest.approx(1.0, abs=0.1)
    assert log_growth.value > 0

    bounded = kernel_weighted_norm(KernelSpec(1.0, 1.0), 1.0, 2.0, 8.0, plane_grid)
    assert bounded.growth_model == "bounded"
    assert bounded.value < log_growth.value


def test_kernel_table_columns():
    table = kernel_table(KernelSpec(2.0, 1.0), [0.0, 1.0, 2.0])
    assert list(table.columns) == ["r", "value"]
    assert table["value"].iloc[0] == pytest.approx(1.0 / (4.0 * np.pi), rel=1e-8)


@pytest.mark.parametrize("alpha", [1.0, 2.0])
def test_fourier_series_matches_closed_forms(alpha):
    rng = np.random.default_rng(5)
    x1, x2 = rng.uniform(-2.8, 2.8, (2, 7))
    series = kernel_fourier_series(alpha, 1.0, x1, x2)
    exact = kernel_closed_form(alpha, 1.0, np.hypot(x1, x2))
    assert np.allclose(series, exact, rtol=1e-7, atol=0.0)


@pytest.mark.parametrize("alpha", [0.5, 2.0 / 3.0, 1.5])
@pytest.mark.parametrize("r", [16.0, 32.0, 64.0])
def test_far_field_tracks_the_radial_route(alpha, r):
    far = float(kernel_far_field(alpha, 1.0, np.array([r]))[0])
    radial = float(kernel_radial(KernelSpec(alpha, 1.0), r, rtol=1e-10, atol=0.0))
    assert far == pytest.approx(radial, rel=1e-5)


def test_far_field_leading_term_at_alpha_one_half():
    r = np.array([1e4])
    leading = 2.0 ** 0.5 * special.gamma(1.25) ** 2 * np.sin(np.pi / 4.0) / np.pi ** 2 * r ** -2.5
    assert kernel_far_field(0.5, 1.0, r)[0] == pytest.approx(leading[0], rel=2e-2)


def test_far_field_skips_vanishing_terms():
    # every even term vanishes at alpha = 1; the series is then the Poisson expansion
    r = np.array([10.0])
    expected = kernel_closed_form(1.0, 1.0, r)
    assert kernel_far_field(1.0, 1.0, r)[0] == pytest.approx(expected[0], rel=1e-10)
    assert np.all(kernel_far_field(2.0, 3.0, np.geomspace(5.0, 500.0, 7)) == 0.0)


@pytest.mark.parametrize("alpha", [1.5, 1.2])
def test_plane_grid_kernel_agrees_with_the_radial_route(alpha, plane_grid):
    plane = spectral.as_physical(kernel_on_grid(KernelSpec(alpha, 1.0), plane_grid, periodic=False))
    for j in (0, 8, 16):
        radial = float(kernel_radial(KernelSpec(alpha, 1.0), j * plane_grid.dx, atol=1e-14))
        assert plane[128 + j, 128] == pytest.approx(radial, rel=1e-6)


def test_fourier_series_agrees_with_the_radial_route_below_alpha_one():
    radii = np.array([0.0, 1.0, 2.0])
    series = kernel_fourier_series(0.7, 1.0, radii, np.zeros(3))
    radial = kernel_radial(KernelSpec(0.7, 1.0), radii, atol=1e-14)
    assert np.allclose(series, radial, rtol=1e-6, atol=0.0)


@pytest.mark.slow
@pytest.mark.parametrize("alpha", [0.5, 0.7])
def test_tail_exponents_below_alpha_one(alpha):
    assert tail_exponent(KernelSpec(alpha, 1.0), r_min=1e3) == pytest.approx(-(2.0 + alpha), abs=0.1)
    assert tail_exponent(KernelSpec(alpha, 1.0, (1, 0)), r_min=1e3) == pytest.approx(-(3.0 + alpha), abs=0.1)
