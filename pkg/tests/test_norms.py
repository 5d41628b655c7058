import numpy as np
import pytest

from src.analysis.norms import contamination_index, lp_norm, sobolev_norm, weighted_norm
from src.core.errors import WindowError
from src.models.datatypes import Field, GridSpec
from src.numerics import spectral


@pytest.fixture
def constant():
    return Field.from_physical(GridSpec(32, 4.0), np.full((32, 32), 2.0))


def test_lp_norms_of_constant(constant):
    assert lp_norm(constant, 1.0) == pytest.approx(32.0, rel=1e-14)
    assert lp_norm(constant, 2.0) == pytest.approx(8.0, rel=1e-14)
    assert lp_norm(constant, np.inf) == 2.0


def test_weighted_norm_window(constant):
    with pytest.raises(WindowError):
        weighted_norm(constant, 1.0, 2.0, R=1.5)
    sup = weighted_norm(constant, 0.0, np.inf)
    assert sup.value == 2.0
    assert sup.contamination == 1.0


def test_weighted_norm_grows_with_weight(gaussian):
    plain = weighted_norm(gaussian, 0.0, 2.0, R=4.0)
    weighted = weighted_norm(gaussian, 2.0, 2.0, R=8.0)
    assert plain.value == pytest.approx(lp_norm(gaussian, 2.0), rel=1e-12)
    assert weighted.value > 0.0
    assert weighted.contamination < 1e-14


def test_contamination_of_concentrated_field(gaussian):
    assert contamination_index(gaussian) < 1e-14
    zero = Field.from_physical(gaussian.grid, np.zeros((128, 128)))
    assert contamination_index(zero) == 0.0


def test_sobolev_zero_is_l2_for_mean_zero(ensemble):
    f = ensemble.member(0, GridSpec(64, ensemble.spec.box_length))
    assert sobolev_norm(f, 0.0) == pytest.approx(spectral.l2_norm(f), rel=1e-12)
    assert sobolev_norm(f, 1.0) > 0.0
