import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from abcmisspec.rng import SeedPath, as_seed, standard_normal, uniform


def test_same_path_same_stream():
    a = SeedPath(42, (1, 2)).generator().random(5)
    b = SeedPath(42).child(1).child(2).generator().random(5)
    np.testing.assert_array_equal(a, b)


def test_distinct_paths_differ():
    a = SeedPath(42, (1, 2)).generator().random(5)
    b = SeedPath(42, (2, 1)).generator().random(5)
    c = SeedPath(43, (1, 2)).generator().random(5)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_disjoint_paths_uncorrelated():
    T = 20_000
    x = standard_normal(SeedPath(7, (0,)).generator(), T)
    y = standard_normal(SeedPath(7, (1,)).generator(), T)
    assert abs(np.corrcoef(x, y)[0, 1]) < 4 / np.sqrt(T)


def test_negative_path_rejected():
    with pytest.raises(ValueError):
        SeedPath(1, (-1,))


def test_str_and_coercion():
    assert str(SeedPath(5, (1, 0, 3))) == "5:1/0/3"
    assert as_seed(5) == SeedPath(5)


@given(st.integers(0, 2**63))
def test_uniform_open_interval(seed):
    u = uniform(SeedPath(seed).generator(), 1000)
    assert np.all((u > 0) & (u < 1))
    assert np.all(np.isfinite(standard_normal(SeedPath(seed).generator(), 1000)))
