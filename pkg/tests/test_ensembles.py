import numpy as np
import pytest

from src.models.datatypes import EnsembleSpec, GridSpec
from src.numerics import spectral
from src.providers.ensembles import FieldEnsemble


def test_members_have_zero_mean(ensemble):
    grid = GridSpec(64, ensemble.spec.box_length)
    for f in ensemble.members(grid):
        assert spectral.as_spectral(spectral.to_spectral(f))[0, 0] == pytest.approx(0.0, abs=1e-9)


def test_members_are_deterministic(ensemble):
    grid = GridSpec(64, ensemble.spec.box_length)
    again = FieldEnsemble(EnsembleSpec(seed=3, count=6))
    assert np.array_equal(spectral.as_physical(ensemble.member(2, grid)), spectral.as_physical(again.member(2, grid)))
    assert not np.allclose(spectral.as_physical(ensemble.member(2, grid)), spectral.as_physical(ensemble.member(3, grid)))


def test_same_function_on_every_grid(ensemble):
    coarse = spectral.as_physical(ensemble.member(1, GridSpec(64, ensemble.spec.box_length)))
    fine = spectral.as_physical(ensemble.member(1, GridSpec(128, ensemble.spec.box_length)))
    assert np.allclose(fine[::2, ::2], coarse, rtol=0.0, atol=1e-12 * np.abs(coarse).max())


def test_pair_members_differ(ensemble):
    f, g = ensemble.pair(0, GridSpec(64, ensemble.spec.box_length))
    assert not np.allclose(spectral.as_physical(f), spectral.as_physical(g))


def test_grid_must_match_box_and_resolution(ensemble):
    with pytest.raises(ValueError):
        ensemble.member(0, GridSpec(64, 10.0))
    with pytest.raises(ValueError):
        ensemble.member(0, GridSpec(32, ensemble.spec.box_length))
    assert len(ensemble) == 6
