"""Radial Hankel moments of the fractional heat-kernel symbol.

    I(alpha, t, n, m; r) = int_0^inf rho**m exp(-t rho**alpha) J_n(r rho) d rho

After ``u = r rho`` the integrand is split into panels between consecutive
zeros of ``J_n``. The first panel (which holds the ``u**alpha`` cusp at the
origin) goes through adaptive ``quad``; the rest use fixed Gauss-Legendre rules
and the alternating panel sums are accelerated with Wynn's epsilon algorithm.
"""

from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy import integrate, special

from src.core.cache import SQLiteCache
from src.core.errors import QuadratureError
from src.core.logger import logger

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_CHUNK = 32
_EPSILON_WINDOW = 41
# exp(-x) below this is treated as an exact zero envelope
_ENVELOPE_CUTOFF = 745.0


@lru_cache(maxsize=16)
def _bessel_zeros(order: int, count: int) -> np.ndarray:
    return special.jn_zeros(order, count)


def _panel_edges(order: int, count: int) -> np.ndarray:
    """``count + 1`` panel edges: 0, then Bessel zeros (McMahon spacing past the table)."""
    tabulated = min(count, 2000)
    zeros = _bessel_zeros(order, tabulated)
    if count > tabulated:
        extra = zeros[-1] + np.pi * np.arange(1, count - tabulated + 1)
        zeros = np.concatenate([zeros, extra])
    return np.concatenate([[0.0], zeros])


def wynn_epsilon(partial_sums: np.ndarray) -> Tuple[float, float]:
    """Epsilon-algorithm limit of a sequence of partial sums.

    Returns:
        ``(estimate, error_estimate)`` from the last two even columns.
    """
    s = np.asarray(partial_sums, dtype=float)
    if s.size < 3:
        return float(s[-1]), float("inf")
    prev = np.zeros(s.size + 1)
    cur = s.copy()
    best, last_even = float(s[-1]), float(s[-1])
    err = abs(float(s[-1] - s[-2]))
    col = 0
    while cur.size > 1:
        diff = np.diff(cur)
        with np.errstate(divide="ignore", invalid="ignore"):
            nxt = prev[1:cur.size] + 1.0 / diff
        if not np.all(np.isfinite(nxt)):
            break
        prev, cur = cur, nxt
        col += 1
        if col % 2 == 0:
            est = float(cur[-1])
            err = abs(est - last_even)
            best, last_even = est, est
    return best, err


def _integrand(u: np.ndarray, alpha: float, t: float, order: int, power: float, r: float) -> np.ndarray:
    return u ** power * np.exp(-t * (u / r) ** alpha) * special.jv(order, u)


def hankel_moment(
    alpha: float,
    t: float,
    order: int,
    power: float,
    r: float,
    *,
    rtol: float = 1e-10,
    atol: float = 1e-9,
    max_panels: int = 20000,
    cache: Optional[SQLiteCache] = None,
) -> float:
    """Evaluate ``int_0^inf rho**power exp(-t rho**alpha) J_order(r rho) d rho``.

    Args:
        alpha: Symbol exponent in (0, 2].
        t: Time, > 0.
        order: Bessel order ``n >= 0``.
        power: Moment power ``m`` (``m + 1 > 0``).
        r: Radius, >= 0.
        rtol: Relative tolerance on the result.
        atol: Absolute tolerance on the result.
        max_panels: Panel budget before giving up.
        cache: Optional on-disk memo.

    Raises:
        QuadratureError: Tolerance not reached within ``max_panels`` panels.
    """
    if r < 0:
        raise ValueError(f"hankel_moment: r must be nonnegative, got {r}")
    if r == 0.0:
        if order != 0:
            return 0.0
        a = (power + 1.0) / alpha
        return float(special.gamma(a) / (alpha * t ** a))

    key = None
    if cache is not None:
        key = SQLiteCache.make_key("hankel", float(alpha), float(t), order, float(power), float(r),
                                   float(rtol), float(atol))
        hit = cache.get(key)
        if hit is not None:
            return float(hit["value"])

    value = _hankel_substituted(alpha, t, order, power, r, rtol, atol, max_panels)
    if cache is not None and key is not None:
        cache.set(key, {"value": value})
    return value


def _hankel_substituted(
    alpha: float, t: float, order: int, power: float, r: float,
    rtol: float, atol: float, max_panels: int,
) -> float:
    scale = r ** -(power + 1.0)
    u_atol = atol / scale
    # envelope exp(-t (u/r)^alpha) vanishes past u_env
    u_env = r * (_ENVELOPE_CUTOFF / t) ** (1.0 / alpha)
    edges = _panel_edges(order, max_panels)

    def f(u: np.ndarray) -> np.ndarray:
        return _integrand(u, alpha, t, order, power, r)

    u_scale = r * t ** (-1.0 / alpha)
    first_end = edges[1]
    points = [p for p in (u_scale, 10 * u_scale, 100 * u_scale) if 0 < p < first_end]
    first, first_err = integrate.quad(
        lambda u: float(f(np.array(u))), 0.0, first_end,
        points=points or None, limit=400, epsabs=0.1 * u_atol, epsrel=0.1 * rtol,
    )

    sums = [first]
    estimate, prev_estimate = first, None
    for start in range(1, max_panels, _CHUNK):
        stop = min(start + _CHUNK, max_panels)
        a, b = edges[start:stop], edges[start + 1:stop + 1]
        half, mid = 0.5 * (b - a), 0.5 * (b + a)
        nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        panel = half * (f(nodes) @ _GL_WEIGHTS)
        sums.extend(sums[-1] + np.cumsum(panel))
        if b[-1] > u_env:
            return scale * sums[-1]
        estimate, err = wynn_epsilon(np.array(sums[-_EPSILON_WINDOW:]))
        if prev_estimate is not None:
            err = max(err, abs(estimate - prev_estimate))
            if err <= max(u_atol, rtol * abs(estimate)) + first_err:
                return scale * estimate
        prev_estimate = estimate

    achieved = scale * abs(estimate - (prev_estimate if prev_estimate is not None else sums[-1]))
    logger.error(
        f"hankel_moment: no convergence (alpha={alpha}, t={t}, n={order}, m={power}, r={r})"
    )
    raise QuadratureError("hankel_moment: panel budget exhausted", achieved)
