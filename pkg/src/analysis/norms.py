"""Grid norms: Lebesgue, Sobolev and windowed weighted norms."""

from typing import NamedTuple

import numpy as np

from src.core.errors import WindowError
from src.models.datatypes import Field, GridSpec
from src.numerics import spectral

# Fraction of the box beyond which values count as boundary contamination.
CONTAMINATION_RADIUS = 3.0 / 8.0
SAFE_WINDOW = 0.25


class WeightedNorm(NamedTuple):
    value: float
    contamination: float


def contamination_index(f: Field) -> float:
    """``max_{|x| > 3L/8} |f| / max |f|`` (0 for the zero field)."""
    values = np.abs(spectral.as_physical(f))
    peak = values.max()
    if peak == 0.0:
        return 0.0
    outer = f.grid.radius > CONTAMINATION_RADIUS * f.grid.box_length
    return float(values[outer].max() / peak)


def _lp(values: np.ndarray, p: float, cell_area: float) -> float:
    if np.isinf(p):
        return float(values.max()) if values.size else 0.0
    return float((cell_area * np.sum(values ** p)) ** (1.0 / p))


def lp_norm(f: Field, p: float) -> float:
    """Riemann-sum ``L^p`` norm over the whole box; ``p = inf`` is the grid maximum."""
    return _lp(np.abs(spectral.as_physical(f)), p, f.grid.cell_area)


def weighted_norm(f: Field, mu: float, p: float, R: float | None = None) -> WeightedNorm:
    """Windowed ``(int_{|x| <= R} (|x|**mu |f|)**p dx)**(1/p)``.

    Args:
        f: Field on a centered grid.
        mu: Weight power, >= 0.
        p: Lebesgue exponent (``np.inf`` allowed).
        R: Window radius, at most ``L/4``; defaults to ``L/4``.

    Returns:
        The norm and the contamination index of ``f``.

    Raises:
        WindowError: ``R > L/4``.
    """
    grid = f.grid
    limit = SAFE_WINDOW * grid.box_length
    R = limit if R is None else R
    if R > limit * (1.0 + 1e-12):
        raise WindowError(f"weighted_norm: window {R:.4g} exceeds L/4 = {limit:.4g}")
    inside = grid.radius <= R
    weighted = grid.radius[inside] ** mu * np.abs(spectral.as_physical(f)[inside])
    return WeightedNorm(_lp(weighted, p, grid.cell_area), contamination_index(f))


def sobolev_norm(f: Field, sigma: float) -> float:
    """``||(-Delta)**(sigma/2) f||_{L^2}`` by Parseval."""
    return spectral.spectral_l2_norm(spectral.fractional_laplacian(f, sigma, project_mean=True))


def sobolev_roundoff_floor(f: Field, sigma: float) -> float:
    """Sobolev norm of a spectrum sitting at the round-off floor ``eps * max|f_hat|``."""
    grid: GridSpec = f.grid
    floor = np.finfo(float).eps * np.abs(spectral.as_spectral(f)).max()
    weights = spectral.power_symbol(grid, 2.0 * sigma)
    return float(np.sqrt(grid.cell_area / grid.n ** 2 * floor ** 2 * weights.sum()))
