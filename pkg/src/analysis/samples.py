"""Per-sample diagnostics attached to solver trajectories."""

from typing import List

import numpy as np

from src.analysis.norms import (
    contamination_index, lp_norm, sobolev_norm, sobolev_roundoff_floor, weighted_norm,
)
from src.models.datatypes import DecaySample, Field, KernelSpec, SimState
from src.numerics import spectral
from src.numerics.kernel import check_resolution, kernel_on_grid

CONTAMINATION_LIMIT = 1e-3
UNDERFLOW_FRACTION = 1e-2


def profile_residual(theta: Field, alpha: float, t: float, mass0: float) -> Field:
    """``theta - M G_alpha(t)`` with the periodised kernel of the same grid.

    At ``t = 0`` the kernel is the discrete delta at the origin.
    """
    grid = theta.grid
    if t > 0:
        kernel = spectral.as_physical(kernel_on_grid(KernelSpec(alpha, t), grid, strict=False, warn=False))
    else:
        kernel = np.zeros((grid.n, grid.n))
        kernel[grid.n // 2, grid.n // 2] = 1.0 / grid.cell_area
    return Field.from_physical(grid, spectral.as_physical(theta) - mass0 * kernel)


def sample_flags(theta: Field, alpha: float, t: float, sigma: float) -> List[str]:
    flags: List[str] = []
    if contamination_index(theta) > CONTAMINATION_LIMIT:
        flags.append("CONTAMINATED")
    if t > 0 and check_resolution(alpha, t, theta.grid) is not None:
        flags.append("UNDER_RESOLVED")
    value = sobolev_norm(theta, sigma)
    if value > 0 and sobolev_roundoff_floor(theta, sigma) > UNDERFLOW_FRACTION * value:
        flags.append("SPECTRAL_UNDERFLOW")
    return flags


def sample_diagnostics(state: SimState, alpha: float, sigma: float, q: float, mass0: float) -> DecaySample:
    """Norms of one state: mass, sup, L2, Sobolev, weighted moment and residual from ``M G``."""
    theta = state.theta
    return DecaySample(
        t=float(state.t),
        mass=spectral.mass(theta),
        linf=lp_norm(theta, np.inf),
        l2=lp_norm(theta, 2.0),
        sobolev=sobolev_norm(theta, sigma),
        moment_q=weighted_norm(theta, 2.0, q).value,
        residual_R=weighted_norm(profile_residual(theta, alpha, state.t, mass0), 2.0, 2.0).value,
        contamination=contamination_index(theta),
        box_length=theta.grid.box_length,
        flags=tuple(sample_flags(theta, alpha, state.t, sigma)),
    )
