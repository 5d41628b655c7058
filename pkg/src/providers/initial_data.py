"""Initial-data families for the solver.

Every family is nonnegative with positive mass and must be negligible
(below ``1e-14`` of its maximum) outside ``|x| <= L/8``.
"""

from typing import Any, Dict, Optional

import numpy as np

from src.core.errors import InitialDataError
from src.core.logger import logger
from src.models.datatypes import Field, GridSpec
from src.providers.base import InitialDataFamily

CONCENTRATION_RADIUS = 1.0 / 8.0
CONCENTRATION_TOLERANCE = 1e-14
DEFAULT_WIDTH = 0.65


def _gaussian(grid: GridSpec, width: float, center: tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    x1, x2 = grid.mesh
    return np.exp(-((x1 - center[0]) ** 2 + (x2 - center[1]) ** 2) / width ** 2)


class RadialGaussian(InitialDataFamily):
    """``eps * exp(-|x|**2 / w**2)``, mass ``eps * pi * w**2``."""

    name = "radial_gaussian"

    def evaluate(self, grid: GridSpec, amplitude: float, params: Dict[str, Any]) -> np.ndarray:
        return amplitude * _gaussian(grid, float(params.get("width", DEFAULT_WIDTH)))


class DoubleGaussian(InitialDataFamily):
    """Two Gaussians of amplitude ``eps`` centred at ``(+-d/2, 0)``; ``d`` defaults to ``w/2``."""

    name = "double_gaussian"

    def evaluate(self, grid: GridSpec, amplitude: float, params: Dict[str, Any]) -> np.ndarray:
        width = float(params.get("width", DEFAULT_WIDTH))
        half = 0.5 * float(params.get("offset", 0.5 * width))
        return (amplitude * _gaussian(grid, width, (half, 0.0))
                + amplitude * _gaussian(grid, width, (-half, 0.0)))


class ShiftedGaussian(InitialDataFamily):
    """Gaussian of amplitude ``eps`` centred at ``shift``; its first moment is ``M * shift``."""

    name = "shifted_gaussian"

    def evaluate(self, grid: GridSpec, amplitude: float, params: Dict[str, Any]) -> np.ndarray:
        shift = params.get("shift", (0.5, 0.0))
        if len(shift) != 2:
            raise InitialDataError(f"shifted_gaussian: shift must have two components, got {shift!r}")
        center = (float(shift[0]), float(shift[1]))
        return amplitude * _gaussian(grid, float(params.get("width", DEFAULT_WIDTH)), center)


class BandlimitedBump(InitialDataFamily):
    """Gaussian bump modulated by a seeded band-limited pattern: ``eps G (1 + g/2)``.

    ``g`` is a random trigonometric polynomial with period ``8 w`` and at most
    ``modes`` harmonics per axis, normalised by the sum of its coefficient moduli
    so ``|g| <= 1`` pointwise.
    """

    name = "bandlimited_bump"

    def evaluate(self, grid: GridSpec, amplitude: float, params: Dict[str, Any]) -> np.ndarray:
        width = float(params.get("width", DEFAULT_WIDTH))
        modes = int(params.get("modes", 3))
        seed = int(params.get("seed", 0))
        rng = np.random.default_rng(seed)
        m = np.arange(-modes, modes + 1)
        coeffs = rng.standard_normal((m.size, m.size)) + 1j * rng.standard_normal((m.size, m.size))
        coeffs[modes, modes] = 0.0
        coeffs = 0.5 * (coeffs + np.conj(coeffs[::-1, ::-1]))

        x1, x2 = grid.mesh
        kappa = 2.0 * np.pi / (8.0 * width)
        phase1 = np.exp(1j * kappa * np.multiply.outer(m, x1[:, 0]))  # (modes, n)
        phase2 = np.exp(1j * kappa * np.multiply.outer(m, x2[0, :]))
        g = np.einsum("ab,ai,bj->ij", coeffs, phase1, phase2).real
        g /= np.abs(coeffs).sum()
        return amplitude * _gaussian(grid, width) * (1.0 + 0.5 * g)


FAMILIES: Dict[str, InitialDataFamily] = {
    fam.name: fam for fam in (RadialGaussian(), DoubleGaussian(), ShiftedGaussian(), BandlimitedBump())
}


def make_initial_data(
    family: str,
    params: Optional[Dict[str, Any]],
    grid: GridSpec,
    amplitude: Optional[float] = None,
) -> Field:
    """Build a named initial field on ``grid``.

    Args:
        family: One of ``radial_gaussian``, ``double_gaussian``, ``shifted_gaussian``,
            ``bandlimited_bump``.
        params: Family parameters; ``params["amplitude"]`` is used when
            ``amplitude`` is not given, else 1.
        grid: Target grid.
        amplitude: Scale factor epsilon.

    Raises:
        InitialDataError: Unknown family, or a field that is not concentrated
            inside ``|x| <= L/8``.
    """
    params = dict(params or {})
    if family not in FAMILIES:
        raise InitialDataError(f"make_initial_data: unknown family {family!r}; known: {sorted(FAMILIES)}")
    eps = float(amplitude if amplitude is not None else params.get("amplitude", 1.0))
    if not eps > 0.0:
        raise InitialDataError(f"make_initial_data: amplitude must be positive, got {eps}")

    values = FAMILIES[family].evaluate(grid, eps, params)
    peak = values.max()
    outer = grid.radius > CONCENTRATION_RADIUS * grid.box_length
    spill = values[outer].max() if outer.any() else 0.0
    if spill >= CONCENTRATION_TOLERANCE * peak:
        raise InitialDataError(
            f"make_initial_data: {family} not concentrated in |x| <= L/8 "
            f"(outer/peak = {spill / peak:.2e}); narrow the width or enlarge the box"
        )
    logger.debug(f"make_initial_data: {family} eps={eps:.4g} peak={peak:.4g} on n={grid.n}, L={grid.box_length}")
    return Field.from_physical(grid, values)
