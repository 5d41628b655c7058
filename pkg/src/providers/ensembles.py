"""Seeded ensembles of mean-zero trigonometric polynomials."""

from typing import Tuple

import numpy as np

from src.models.datatypes import EnsembleSpec, Field, GridSpec
from src.numerics import spectral
from src.providers.base import EnsembleProvider


class FieldEnsemble(EnsembleProvider):
    """Deterministic ensemble: ``(spec, index)`` fixes the function, any grid samples it.

    Args:
        spec: Seed, size and spectral law of the ensemble.
    """

    def __init__(self, spec: EnsembleSpec) -> None:
        self.spec = spec
        m = np.arange(-spec.k_max, spec.k_max + 1)
        m1, m2 = np.meshgrid(m, m, indexing="ij")
        kk = np.hypot(m1, m2)
        band = (kk >= spec.k_min) & (kk <= spec.k_max)
        self._modes = (m1, m2)
        self._envelope = np.where(band, np.where(kk > 0, kk, 1.0) ** -spec.slope, 0.0)

    def __len__(self) -> int:
        return self.spec.count

    # ── public ────────────────────────────────────────────────────────────────

    def coefficients(self, index: int, stream: int = 0) -> np.ndarray:
        """Hermitian coefficient array over modes ``[-k_max, k_max]**2``."""
        rng = np.random.default_rng([self.spec.seed, index, stream])
        shape = self._envelope.shape
        c = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * self._envelope
        c = 0.5 * (c + np.conj(c[::-1, ::-1]))
        c[self.spec.k_max, self.spec.k_max] = 0.0
        return c

    def member(self, index: int, grid: GridSpec) -> Field:
        return self._sample(self.coefficients(index), grid)

    def pair(self, index: int, grid: GridSpec) -> Tuple[Field, Field]:
        return self._sample(self.coefficients(index, 0), grid), self._sample(self.coefficients(index, 1), grid)

    # ── internal ──────────────────────────────────────────────────────────────

    def _sample(self, coeffs: np.ndarray, grid: GridSpec) -> Field:
        if not np.isclose(grid.box_length, self.spec.box_length, rtol=1e-14):
            raise ValueError(
                f"FieldEnsemble: grid box {grid.box_length} != ensemble box {self.spec.box_length}"
            )
        if self.spec.k_max > grid.n // 8:
            raise ValueError(f"FieldEnsemble: k_max={self.spec.k_max} exceeds n/8 = {grid.n // 8}")
        n = grid.n
        m1, m2 = self._modes
        sign = np.where((m1 + m2) % 2 == 0, 1.0, -1.0)
        spec_arr = np.zeros((n, n), dtype=np.complex128)
        spec_arr[m1 % n, m2 % n] = n * n * sign * coeffs
        # physical values come straight from the inverse transform; mean is exactly zero
        return spectral.to_physical(Field.from_spectral(grid, spec_arr))
