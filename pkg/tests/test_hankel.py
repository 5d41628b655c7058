import numpy as np
import pytest

from src.core.cache import SQLiteCache
from src.numerics.hankel import hankel_moment, wynn_epsilon


def test_origin_closed_form():
    # int rho**3 exp(-rho**2) d rho = 1/2
    assert hankel_moment(2.0, 1.0, 0, 3.0, 0.0) == pytest.approx(0.5, rel=1e-14)
    assert hankel_moment(1.0, 1.0, 2, 1.0, 0.0) == 0.0


@pytest.mark.parametrize("r", [0.3, 1.0, 4.0])
def test_gaussian_moment(r):
    # int rho exp(-t rho**2) J0(r rho) d rho = exp(-r**2 / 4t) / 2t
    assert hankel_moment(2.0, 1.0, 0, 1.0, r) == pytest.approx(np.exp(-r * r / 4.0) / 2.0, rel=1e-6)


@pytest.mark.parametrize("r", [0.5, 2.0, 6.0])
def test_poisson_moment(r):
    # int rho exp(-rho) J0(r rho) d rho = (1 + r**2)**-1.5
    assert hankel_moment(1.0, 1.0, 0, 1.0, r) == pytest.approx((1.0 + r * r) ** -1.5, rel=1e-6)


def test_first_order_moment():
    # int rho**2 exp(-rho**2) J1(r rho) d rho = r/4 exp(-r**2/4)
    r = 1.5
    assert hankel_moment(2.0, 1.0, 1, 2.0, r) == pytest.approx(r / 4.0 * np.exp(-r * r / 4.0), rel=1e-6)


def test_negative_radius_rejected():
    with pytest.raises(ValueError):
        hankel_moment(1.0, 1.0, 0, 1.0, -1.0)


def test_cache_round_trip(tmp_path):
    cache = SQLiteCache(tmp_path / "kernel.db")
    first = hankel_moment(1.0, 1.0, 0, 1.0, 2.0, cache=cache)
    key = SQLiteCache.make_key("hankel", 1.0, 1.0, 0, 1.0, 2.0, 1e-10, 1e-9)
    assert cache.get(key) == {"value": first}
    assert hankel_moment(1.0, 1.0, 0, 1.0, 2.0, cache=cache) == first


def test_wynn_epsilon_accelerates_alternating_series():
    k = np.arange(1, 16)
    partial = np.cumsum((-1.0) ** (k + 1) / k)
    estimate, error = wynn_epsilon(partial)
    assert abs(partial[-1] - np.log(2.0)) > 1e-2
    assert estimate == pytest.approx(np.log(2.0), abs=1e-8)
    assert error < 1e-6
