"""Spectral core: transforms, Fourier multipliers and dealiasing on a GridSpec.

Conventions:
  - the spectral array is the unnormalised ``fft2`` of the physical array, so
    ``mean = f_hat[0, 0] / n**2`` and ``||f||_2**2 = dx**2 / n**2 * sum |f_hat|**2``;
  - ``fractional_laplacian(f, s)`` applies the symbol ``|k|**s`` (half-order
    convention: ``s = alpha`` is ``(-Delta)**(alpha/2)``);
  - at ``k = 0`` the symbol is 0 for ``s != 0`` and 1 for ``s == 0``;
  - odd symbols (gradients, Riesz transforms) vanish on the Nyquist row/column.

All functions are pure and return new Fields.
"""

import os
from typing import Tuple

import numpy as np
import scipy.fft as spfft

from src.core.errors import MeanNotZeroError
from src.models.datatypes import Field, GridSpec

FFT_WORKERS = int(os.getenv("QGDECAY_FFT_WORKERS", "1"))

# Relative mean allowed before a negative power insists on projection.
MEAN_TOLERANCE = 1e-13


# ── transforms ────────────────────────────────────────────────────────────────

def fft2(values: np.ndarray) -> np.ndarray:
    return spfft.fft2(values, workers=FFT_WORKERS)


def ifft2_real(values: np.ndarray) -> np.ndarray:
    return spfft.ifft2(values, workers=FFT_WORKERS).real


def as_spectral(f: Field) -> np.ndarray:
    """Spectral array of ``f``, transforming on the fly if only physical values exist."""
    if f.values_spec is not None:
        return f.values_spec
    return fft2(f.values_phys)


def as_physical(f: Field) -> np.ndarray:
    if f.values_phys is not None:
        return f.values_phys
    return ifft2_real(f.values_spec)


def to_spectral(f: Field) -> Field:
    """Return ``f`` with its spectral representation populated."""
    if f.values_spec is not None:
        return f
    return Field(f.grid, values_phys=f.values_phys, values_spec=fft2(f.values_phys))


def to_physical(f: Field) -> Field:
    """Return ``f`` with its physical representation populated."""
    if f.values_phys is not None:
        return f
    return Field(f.grid, values_phys=ifft2_real(f.values_spec), values_spec=f.values_spec)


def from_spectral(grid: GridSpec, spec: np.ndarray) -> Field:
    return Field(grid, values_spec=spec)


# ── scalar summaries ──────────────────────────────────────────────────────────

def mean(f: Field) -> float:
    n = f.grid.n
    return float(as_spectral(f)[0, 0].real) / (n * n)


def mass(f: Field) -> float:
    """Discrete integral, read off the zero mode."""
    return float(as_spectral(f)[0, 0].real) * f.grid.cell_area


def l2_norm(f: Field) -> float:
    if f.values_phys is not None:
        return float(np.sqrt(f.grid.cell_area * np.sum(f.values_phys ** 2)))
    return spectral_l2_norm(f)


def spectral_l2_norm(f: Field) -> float:
    """L2 norm evaluated on the spectral side (Parseval)."""
    n = f.grid.n
    return float(np.sqrt(f.grid.cell_area / (n * n) * np.sum(np.abs(as_spectral(f)) ** 2)))


def sup_norm(f: Field) -> float:
    return float(np.max(np.abs(as_physical(f))))


# ── multipliers ───────────────────────────────────────────────────────────────

def power_symbol(grid: GridSpec, s: float) -> np.ndarray:
    """``|k|**s`` with the zero-mode rule of the module docstring."""
    kabs = grid.kabs
    if s == 0:
        return np.ones_like(kabs)
    out = np.zeros_like(kabs)
    nz = kabs > 0
    out[nz] = kabs[nz] ** s
    return out


def apply_symbol(f: Field, symbol: np.ndarray) -> Field:
    return from_spectral(f.grid, as_spectral(f) * symbol)


def fractional_laplacian(f: Field, s: float, project_mean: bool = False) -> Field:
    """Apply ``(-Delta)**(s/2)``, i.e. the symbol ``|k|**s``.

    Args:
        f: Input field.
        s: Symbol power; negative values are Riesz potentials.
        project_mean: For ``s < 0``, drop the mean silently instead of rejecting it.

    Raises:
        MeanNotZeroError: ``s < 0``, ``|mean| > 1e-13 * ||f||_inf`` and no projection requested.
    """
    if s < 0 and not project_mean:
        m = abs(mean(f))
        scale = sup_norm(f)
        if m > MEAN_TOLERANCE * scale:
            raise MeanNotZeroError(
                f"fractional_laplacian: s={s} needs a mean-zero field "
                f"(|mean|={m:.3e}, ||f||_inf={scale:.3e}); pass project_mean=True"
            )
    return apply_symbol(f, power_symbol(f.grid, s))


def derivative_symbols(grid: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    """``i*k1`` and ``i*k2`` with the Nyquist row/column removed."""
    k1, k2 = grid.wavenumbers
    keep = grid.nyquist_mask
    return 1j * k1 * keep, 1j * k2 * keep


def gradient(f: Field) -> Tuple[Field, Field]:
    d1, d2 = derivative_symbols(f.grid)
    return apply_symbol(f, d1), apply_symbol(f, d2)


def perp_gradient(f: Field) -> Tuple[Field, Field]:
    """``(-d2 f, d1 f)``."""
    d1, d2 = derivative_symbols(f.grid)
    return apply_symbol(f, -d2), apply_symbol(f, d1)


def riesz_symbols(grid: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    """``i*k_j/|k|`` (zero at the origin and on the Nyquist row/column)."""
    d1, d2 = derivative_symbols(grid)
    inv = power_symbol(grid, -1.0)
    return d1 * inv, d2 * inv


def riesz_transform(f: Field, j: int) -> Field:
    r1, r2 = riesz_symbols(f.grid)
    return apply_symbol(f, r1 if j == 1 else r2)


def velocity_spectra(theta_hat: np.ndarray, grid: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Spectra of ``u = perp_grad psi`` with ``psi_hat = |k|**-1 theta_hat``."""
    r1, r2 = riesz_symbols(grid)
    return -r2 * theta_hat, r1 * theta_hat


def stream_function(theta: Field) -> Field:
    """``psi = (-Delta)**(-1/2) theta`` with the mean projected out."""
    return fractional_laplacian(theta, -1.0, project_mean=True)


def riesz_velocity(theta: Field) -> Tuple[Field, Field]:
    """Velocity ``perp_grad psi = (-R2 theta, R1 theta)``; constants carry no velocity."""
    return perp_gradient(stream_function(theta))


def divergence_spectrum(u1: Field, u2: Field) -> np.ndarray:
    d1, d2 = derivative_symbols(u1.grid)
    return d1 * as_spectral(u1) + d2 * as_spectral(u2)


def dealias(f: Field) -> Field:
    return apply_symbol(f, f.grid.dealias_mask)


def convolve(f: Field, g: Field) -> Field:
    """Periodic convolution ``int f(y) g(x - y) dy`` on the centered grid."""
    grid = f.grid
    spec = as_spectral(f) * as_spectral(g) * grid.centering_phase * grid.cell_area
    return from_spectral(grid, spec)
