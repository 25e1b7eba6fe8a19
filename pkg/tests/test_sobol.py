import numpy as np
import pytest
from scipy.stats import qmc

from wavepwr.sobol import MAX_DIM, pseudo_points, sobol_points, unit_samples


def test_first_points_dim1():
    assert sobol_points(4, 1)[:, 0].tolist() == [0.5, 0.75, 0.25, 0.375]


@pytest.mark.parametrize("dim", [2, 40, MAX_DIM])
def test_matches_reference_generator(dim):
    ref = qmc.Sobol(dim, scramble=False, bits=52).random(512)[1:]
    assert np.array_equal(sobol_points(511, dim), ref)


def test_skip():
    assert np.array_equal(sobol_points(5, 3, skip=3), sobol_points(8, 3)[3:])


def test_dimension_limit():
    with pytest.raises(ValueError):
        sobol_points(2, MAX_DIM + 1)


def test_pseudo_is_seeded():
    a, b = pseudo_points(10, 3, 7), pseudo_points(10, 3, 7)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, pseudo_points(10, 3, 8))
    assert np.all((a >= 0) & (a < 1))
    with pytest.raises(ValueError):
        unit_samples(3, 2, "halton")
