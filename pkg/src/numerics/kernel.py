"""Fractional heat kernel G_alpha(t, x) and its derivatives.

Two independent routes:
  - grid: FFT synthesis of ``(i k)**beta exp(-t |k|**alpha)`` on a GridSpec. This is
    the periodised kernel (unit mass, exact semigroup). ``periodic=False`` removes
    the periodic images with the far-field expansion of the plane kernel.
  - radial: Hankel quadrature of the same symbol (``src.numerics.hankel``).

Unit-mass convention throughout: the transform of G_alpha(t) is
``exp(-t |k|**alpha)`` with no 2*pi factors, so ``int G = 1``.
"""

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import special, stats

from src.analysis.norms import weighted_norm
from src.core.cache import SQLiteCache
from src.core.errors import ResolutionError, WindowError
from src.core.logger import logger
from src.models.datatypes import Field, GridSpec, KernelSpec
from src.numerics import spectral
from src.numerics.hankel import hankel_moment

# Images with max(|m1|, |m2|) <= this are summed directly; the rest by lattice expansion.
DIRECT_IMAGES = 4
FAR_FIELD_TERMS = 40
FAR_LATTICE_TERMS = 6
# Truncation bound, relative to the peak, above which a synthesis is logged as under-resolved.
TRUNCATION_WARN = 1e-6


@dataclass
class KernelNormResult:
    """Windowed weighted kernel norm and how it grows with the window."""
    value: float
    contamination: float
    growth_model: str
    growth_exponent: Optional[float]
    expected_exponent: float


# ── closed forms ──────────────────────────────────────────────────────────────

def kernel_peak(alpha: float, t: float) -> float:
    """``G_alpha(t, 0) = Gamma(2/alpha) / (2 pi alpha) * t**(-2/alpha)``."""
    return float(special.gamma(2.0 / alpha) / (2.0 * np.pi * alpha) * t ** (-2.0 / alpha))


def kernel_closed_form(alpha: float, t: float, r: np.ndarray) -> Optional[np.ndarray]:
    """Poisson kernel (alpha=1) or Gaussian (alpha=2); None for other orders."""
    r = np.asarray(r, dtype=float)
    if alpha == 1.0:
        return t / (2.0 * np.pi) * (t * t + r * r) ** -1.5
    if alpha == 2.0:
        return np.exp(-r * r / (4.0 * t)) / (4.0 * np.pi * t)
    return None


def _far_field_sines(k: np.ndarray, alpha: float) -> np.ndarray:
    """``sin(pi k alpha / 2)``, exactly 0 where ``k alpha / 2`` is an integer."""
    half = 0.5 * k * alpha
    sines = np.sin(np.pi * half)
    sines[np.abs(half - np.round(half)) <= 1e-12 * np.maximum(half, 1.0)] = 0.0
    return sines


def kernel_far_field(alpha: float, t: float, r: np.ndarray) -> np.ndarray:
    """Large-``r`` expansion of the plane kernel, optimally truncated per point.

    ``G ~ pi**-2 sum_k (-1)**(k+1)/k! 2**(k alpha) Gamma(1 + k alpha/2)**2
    sin(pi k alpha/2) t**k r**(-2 - k alpha)``
    """
    r = np.asarray(r, dtype=float)
    k = np.arange(1, FAR_FIELD_TERMS + 1, dtype=float)
    sines = _far_field_sines(k, alpha)
    log_mag = (k * alpha * np.log(2.0) + 2.0 * special.gammaln(1.0 + 0.5 * k * alpha)
               - special.gammaln(k + 1.0) + k * np.log(t) - 2.0 * np.log(np.pi))
    signs = np.where(k % 2 == 1, 1.0, -1.0) * np.sign(sines)
    if not np.any(signs):
        return np.zeros_like(r)

    flat = r.reshape(-1)
    # terms[i, j]: term j at point i
    log_terms = log_mag[None, :] + np.log(np.abs(sines) + (sines == 0))[None, :] \
        - (2.0 + k[None, :] * alpha) * np.log(flat)[:, None]
    mags = np.where(signs[None, :] != 0, np.exp(log_terms), np.inf)
    stop = np.argmin(mags, axis=1)
    used = np.arange(k.size)[None, :] <= stop[:, None]
    terms = np.where(used & (signs[None, :] != 0), signs[None, :] * np.exp(log_terms), 0.0)
    return terms.sum(axis=1).reshape(r.shape)


def kernel_truncation_bound(spec: KernelSpec, grid: GridSpec) -> float:
    """Bound on the pointwise error from spectral content beyond the grid's band."""
    a = 2.0 / spec.alpha
    tail = special.gammaincc(a, spec.t * grid.k_max ** spec.alpha) * special.gamma(a)
    return float(tail * spec.t ** (-a) / (2.0 * np.pi * spec.alpha))


# ── grid route ────────────────────────────────────────────────────────────────

def check_resolution(alpha: float, t: float, grid: GridSpec) -> Optional[str]:
    """Return a reason string if ``(alpha, t)`` falls outside the grid's window."""
    scale = t ** (1.0 / alpha)
    if scale < 4.0 * grid.dx:
        return f"kernel scale {scale:.4g} below 4*dx = {4.0 * grid.dx:.4g}"
    if grid.box_length < 16.0 * scale:
        return f"box {grid.box_length:.4g} shorter than 16*scale = {16.0 * scale:.4g}"
    return None


def kernel_symbol(spec: KernelSpec, grid: GridSpec) -> np.ndarray:
    """``(i k1)**b1 (i k2)**b2 exp(-t |k|**alpha)``."""
    symbol = np.exp(-spec.t * grid.kabs ** spec.alpha).astype(np.complex128)
    if spec.order:
        d1, d2 = spectral.derivative_symbols(grid)
        symbol = symbol * d1 ** spec.beta[0] * d2 ** spec.beta[1]
    return symbol


def kernel_on_grid(
    spec: KernelSpec,
    grid: GridSpec,
    periodic: bool = True,
    strict: bool = True,
    warn: bool = True,
) -> Field:
    """Synthesize ``d^beta G_alpha(t, .)`` on the grid.

    Args:
        spec: Kernel order, time and derivative.
        grid: Target grid.
        periodic: Keep the periodised kernel (torus). With False the periodic
            images are subtracted (``beta == (0, 0)`` only).
        strict: Raise on out-of-window combinations instead of logging them.
        warn: Log UNDER_RESOLVED warnings (callers that flag samples turn this off).

    Raises:
        ResolutionError: ``strict`` and the grid does not resolve the kernel.
    """
    reason = check_resolution(spec.alpha, spec.t, grid)
    if reason is not None:
        if strict:
            raise ResolutionError(f"kernel_on_grid: alpha={spec.alpha}, t={spec.t}: {reason}")
        if warn:
            logger.warning(f"kernel_on_grid: UNDER_RESOLVED alpha={spec.alpha}, t={spec.t}: {reason}")

    bound = kernel_truncation_bound(spec, grid)
    if warn and bound > TRUNCATION_WARN * kernel_peak(spec.alpha, spec.t):
        logger.warning(
            f"kernel_on_grid: UNDER_RESOLVED truncation bound {bound:.3e} "
            f"(peak {kernel_peak(spec.alpha, spec.t):.3e}) for alpha={spec.alpha}, t={spec.t}"
        )

    spec_arr = kernel_symbol(spec, grid) * grid.centering_phase / grid.cell_area
    field = spectral.to_physical(spectral.from_spectral(grid, spec_arr))
    if periodic:
        return field
    if spec.order:
        raise ValueError("kernel_on_grid: image removal is only available for beta = (0, 0)")
    values = field.values_phys - _image_sum(spec.alpha, spec.t, grid)
    return Field.from_physical(grid, values)


def _image_sum(alpha: float, t: float, grid: GridSpec) -> np.ndarray:
    """``sum_{m != 0} G(x + m L)`` over all lattice images, at the grid nodes."""
    x1, x2 = grid.mesh
    return _image_sum_at(alpha, t, grid.box_length, x1, x2)


def _image_sum_at(alpha: float, t: float, L: float, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    total = np.zeros_like(x1, dtype=float)
    direct = [(m1, m2) for m1 in range(-DIRECT_IMAGES, DIRECT_IMAGES + 1)
              for m2 in range(-DIRECT_IMAGES, DIRECT_IMAGES + 1) if (m1, m2) != (0, 0)]
    for m1, m2 in direct:
        total += kernel_far_field(alpha, t, np.hypot(x1 + m1 * L, x2 + m2 * L))

    # far lattice: second-order expansion in x of sum |x + mL|**-p over max|m| > DIRECT_IMAGES
    rho2 = (x1 * x1 + x2 * x2) / (L * L)
    for k in range(1, FAR_LATTICE_TERMS + 1):
        p = 2.0 + k * alpha
        c = _far_field_coefficient(alpha, t, k)
        if c == 0.0:
            continue
        total += c * L ** -p * (_lattice_tail(p) + 0.25 * p * p * rho2 * _lattice_tail(p + 2.0))
    return total


def _far_field_coefficient(alpha: float, t: float, k: int) -> float:
    s = float(_far_field_sines(np.array([float(k)]), alpha)[0])
    if s == 0.0:
        return 0.0
    sign = 1.0 if k % 2 == 1 else -1.0
    mag = np.exp(k * alpha * np.log(2.0) + 2.0 * special.gammaln(1.0 + 0.5 * k * alpha)
                 - special.gammaln(k + 1.0))
    return float(sign * mag * s * t ** k / np.pi ** 2)


def _lattice_tail(p: float) -> float:
    """``sum |m|**-p`` over integer vectors with ``max(|m1|, |m2|) > DIRECT_IMAGES``."""
    s = 0.5 * p
    beta = 4.0 ** -s * (special.zeta(s, 0.25) - special.zeta(s, 0.75))
    full = 4.0 * special.zeta(s) * beta
    m = np.arange(-DIRECT_IMAGES, DIRECT_IMAGES + 1, dtype=float)
    mm = np.hypot(*np.meshgrid(m, m, indexing="ij"))
    near = np.sum(mm[mm > 0] ** -p)
    return float(full - near)


def kernel_fourier_series(
    alpha: float,
    t: float,
    x1: np.ndarray,
    x2: np.ndarray,
    box_length: float = 32.0,
    cutoff: float = 36.0,
    chunk: int = 256,
) -> np.ndarray:
    """Plane kernel at arbitrary points: periodised Fourier series on ``box_length`` minus the images.

    The series keeps every mode with ``t |k|**alpha <= cutoff`` per axis, so the
    dropped content is below ``Gamma(2/alpha, cutoff) / (2 pi alpha) * t**(-2/alpha)``.
    No grid or FFT is involved, which makes this an independent route to the
    synthesis in ``kernel_on_grid`` and the Hankel quadrature in ``kernel_radial``.
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    L = float(box_length)
    modes = int(np.ceil(L / (2.0 * np.pi) * (cutoff / t) ** (1.0 / alpha)))
    k = 2.0 * np.pi / L * np.arange(modes + 1)
    # even symbol: fold +-m onto m >= 0
    fold = np.where(np.arange(modes + 1) == 0, 1.0, 2.0)
    c1 = fold[:, None] * np.cos(k[:, None] * x1[None, :])
    c2 = fold[:, None] * np.cos(k[:, None] * x2[None, :])

    total = np.zeros(x1.size)
    for start in range(0, modes + 1, chunk):
        rows = slice(start, min(start + chunk, modes + 1))
        weights = np.exp(-t * np.hypot(k[rows, None], k[None, :]) ** alpha)
        total += np.sum(c1[rows] * (weights @ c2), axis=0)
    return total / (L * L) - _image_sum_at(alpha, t, L, x1, x2)


def apply_semigroup(f: Field, alpha: float, t: float) -> Field:
    """Linear flow ``G_alpha(t) * f`` as the exact multiplier ``exp(-t |k|**alpha)``."""
    return spectral.apply_symbol(f, np.exp(-t * f.grid.kabs ** alpha))


# ── radial route ──────────────────────────────────────────────────────────────

def kernel_radial(
    spec: KernelSpec,
    r: float | Iterable[float],
    *,
    rtol: float = 1e-10,
    atol: float = 1e-9,
    cache: Optional[SQLiteCache] = None,
) -> float | np.ndarray:
    """``G_alpha(t, r) = (2 pi)**-1 int_0^inf exp(-t rho**alpha) J_0(r rho) rho d rho``."""
    if spec.order:
        raise ValueError("kernel_radial: use kernel_derivative_radial for beta != (0, 0)")
    radii = np.atleast_1d(np.asarray(r, dtype=float))
    values = np.array([
        hankel_moment(spec.alpha, spec.t, 0, 1.0, float(ri), rtol=rtol, atol=atol, cache=cache)
        for ri in radii
    ]) / (2.0 * np.pi)
    return float(values[0]) if np.ndim(r) == 0 else values


def _harmonics(beta: Sequence[int]) -> np.ndarray:
    """Fourier coefficients ``a_n`` of ``cos(phi)**b1 sin(phi)**b2`` (index ``n mod 8``)."""
    phi = 2.0 * np.pi * np.arange(8) / 8.0
    return np.fft.fft(np.cos(phi) ** beta[0] * np.sin(phi) ** beta[1]) / 8.0


def kernel_derivative_radial(
    spec: KernelSpec,
    r: float,
    angle: float,
    *,
    rtol: float = 1e-10,
    atol: float = 1e-9,
    cache: Optional[SQLiteCache] = None,
) -> float:
    """``d^beta G_alpha(t, x)`` at ``x = r (cos angle, sin angle)`` by Hankel moments.

    Expands ``(i xi)**beta`` in angular harmonics ``a_n e^{i n phi}`` and uses
    ``d^beta G = (2 pi)**-1 sum_n a_n i**(|beta| + |n|) e^{i n angle} I_{|n|, |beta|+1}(r)``.
    """
    order = spec.order
    if order == 0:
        return float(kernel_radial(spec, r, rtol=rtol, atol=atol, cache=cache))
    a = _harmonics(spec.beta)
    total = 0.0 + 0.0j
    for n in range(-order, order + 1):
        coeff = a[n % 8]
        if abs(coeff) < 1e-14:
            continue
        moment = hankel_moment(spec.alpha, spec.t, abs(n), float(order + 1), r,
                               rtol=rtol, atol=atol, cache=cache)
        total += coeff * 1j ** (order + abs(n)) * np.exp(1j * n * angle) * moment
    return float(total.real / (2.0 * np.pi))


# ── checks ────────────────────────────────────────────────────────────────────

def scaling_check(alpha: float, t: float, radii: Sequence[float], box_length: float = 32.0) -> float:
    """Max over ``radii`` of ``|G(t, r) - t**(-2/alpha) G(1, t**(-1/alpha) r)| / G(t, 0)``.

    ``G(t, .)`` comes from the Hankel quadrature and ``G(1, .)`` from the
    Fourier series on a box of ``box_length``, so the two sides share no code.

    Raises:
        ResolutionError: A rescaled radius lies outside ``box_length / 4``.
    """
    radii = np.asarray(radii, dtype=float)
    scaled = t ** (-1.0 / alpha) * radii
    if scaled.max(initial=0.0) > 0.25 * box_length:
        raise ResolutionError(
            f"scaling_check: rescaled radius {scaled.max():.4g} outside box_length/4 = {0.25 * box_length:.4g}"
        )
    lhs = np.atleast_1d(kernel_radial(KernelSpec(alpha, t), radii, rtol=1e-11, atol=1e-14))
    rhs = t ** (-2.0 / alpha) * kernel_fourier_series(alpha, 1.0, scaled, np.zeros_like(scaled), box_length)
    return float(np.max(np.abs(lhs - rhs)) / kernel_peak(alpha, t))


def tail_exponent(
    spec: KernelSpec,
    r_min: Optional[float] = None,
    r_max: Optional[float] = None,
    n_points: int = 12,
    angle: float = np.pi / 7.0,
) -> float:
    """Least-squares slope of ``log|d^beta G|`` against ``log r``; expect ``-(2 + alpha + |beta|)``.

    The default window is ``[8 t**(1/alpha), 80 t**(1/alpha)]``.

    Raises:
        WindowError: The window spans less than one decade.
    """
    scale = spec.t ** (1.0 / spec.alpha)
    r_min = 8.0 * scale if r_min is None else r_min
    r_max = 10.0 * r_min if r_max is None else r_max
    if r_max < 10.0 * r_min * (1.0 - 1e-12):
        raise WindowError(f"tail_exponent: window [{r_min:.4g}, {r_max:.4g}] spans less than a decade")
    radii = np.geomspace(r_min, r_max, n_points)
    values = np.array([
        kernel_derivative_radial(spec, float(r), angle, rtol=1e-8, atol=0.0) for r in radii
    ])
    fit = stats.linregress(np.log(radii), np.log(np.abs(values)))
    logger.info(f"tail_exponent: alpha={spec.alpha}, beta={spec.beta}, slope={fit.slope:.5f}")
    return float(fit.slope)


def kernel_weighted_norm(
    spec: KernelSpec,
    mu: float,
    p: float,
    R: float,
    grid: GridSpec,
    n_growth: int = 10,
) -> KernelNormResult:
    """Windowed ``|| |x|**mu G_alpha(t) ||_{L^p(|x| <= R)}`` plus its growth in ``R``.

    Growth is read off the radial shell density ``R**(mu p + 2) G(R)**p`` on
    ``[8, 80] * t**(1/alpha)``: a positive shell exponent ``s`` means
    ``value ~ R**(s/p)`` (model ``power``); a zero one means
    ``value**p ~ log(R)**kappa`` with ``kappa = 1 + d log(shell) / d log log R``
    (model ``log``); a negative one means the norm converges (model ``bounded``).
    """
    field = kernel_on_grid(spec, grid, periodic=spec.order > 0)
    wn = weighted_norm(field, mu, p, R)

    shell_exponent = mu * p + 2.0 - p * (2.0 + spec.alpha + spec.order)
    if spec.order or shell_exponent < -1e-12:
        model = "bounded"
        return KernelNormResult(wn.value, wn.contamination, model, None, shell_exponent / p)

    scale = spec.t ** (1.0 / spec.alpha)
    radii = np.geomspace(8.0 * scale, 80.0 * scale, n_growth)
    g = np.abs(np.asarray(kernel_radial(spec, radii, rtol=1e-8, atol=0.0)))
    log_shell = (mu * p + 2.0) * np.log(radii) + p * np.log(g)
    if shell_exponent > 1e-12:
        slope = stats.linregress(np.log(radii), log_shell).slope
        return KernelNormResult(wn.value, wn.contamination, "power", float(slope / p), shell_exponent / p)
    slope = stats.linregress(np.log(np.log(radii)), log_shell).slope
    return KernelNormResult(wn.value, wn.contamination, "log", float(1.0 + slope), 1.0)


def kernel_table(
    spec: KernelSpec,
    radii: Sequence[float],
    angle: float = 0.0,
    cache: Optional[SQLiteCache] = None,
) -> pd.DataFrame:
    """Radial-route kernel values as a two-column table (``r``, ``value``)."""
    values = [kernel_derivative_radial(spec, float(r), angle, cache=cache) for r in radii]
    return pd.DataFrame({"r": np.asarray(radii, dtype=float), "value": values})
