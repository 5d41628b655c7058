"""Abstract base classes for field sources."""

from abc import ABC, abstractmethod
from typing import Any, Dict, Iterator, Tuple

import numpy as np

from src.models.datatypes import Field, GridSpec


class InitialDataFamily(ABC):
    """A named family of nonnegative, compactly concentrated initial temperatures."""

    name: str = ""

    @abstractmethod
    def evaluate(self, grid: GridSpec, amplitude: float, params: Dict[str, Any]) -> np.ndarray:
        """
        Evaluate the family on the grid nodes.

        Args:
            grid (GridSpec): Target grid.
            amplitude (float): Scale factor epsilon.
            params (Dict[str, Any]): Family parameters (width, offset, seed, ...).

        Returns:
            np.ndarray: Physical values, shape ``(n, n)``.
        """
        pass


class EnsembleProvider(ABC):
    """Abstract interface for deterministic families of random test fields."""

    @abstractmethod
    def member(self, index: int, grid: GridSpec) -> Field:
        """
        Return ensemble member ``index`` sampled on ``grid``.

        Args:
            index (int): Member id, ``0 <= index < count``.
            grid (GridSpec): Target grid; must match the ensemble's box.

        Returns:
            Field: Real, mean-zero field.
        """
        pass

    @abstractmethod
    def pair(self, index: int, grid: GridSpec) -> Tuple[Field, Field]:
        """Return two independent members ``(f, g)`` for bilinear tests."""
        pass

    def members(self, grid: GridSpec) -> Iterator[Field]:
        for i in range(len(self)):
            yield self.member(i, grid)

    @abstractmethod
    def __len__(self) -> int:
        pass
