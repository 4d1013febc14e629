import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracport.errors import ConfigError
from fracport.penalty import PenaltyParams, penalty, rho, rho_derivative

finite = st.floats(-1e6, 1e6, allow_nan=False)
shapes = st.floats(1e-3, 1e3)


@pytest.mark.parametrize("a,t,expected", [(1, 0, 0.0), (1, 1, 0.5), (2, -3, 6 / 7)])
def test_rho_values(a, t, expected):
    assert rho(PenaltyParams(a), t) == pytest.approx(expected, abs=1e-15)


def test_rho_vectorizes():
    out = rho(PenaltyParams(1.0), np.array([-1.0, 0.0, 3.0]))
    np.testing.assert_allclose(out, [0.5, 0.0, 0.75])


@pytest.mark.parametrize("a", [0.0, -1.0, math.nan, math.inf])
def test_bad_shape_rejected(a):
    with pytest.raises(ConfigError):
        PenaltyParams(a)


@pytest.mark.parametrize("a,x,expected", [
    (1, np.zeros(5), 0.0),
    (1, np.ones(3), 1.5),
    (100, np.array([0.3, 0.0, -0.7]), 30 / 31 + 70 / 71),
])
def test_penalty_values(a, x, expected):
    assert penalty(PenaltyParams(a), x) == pytest.approx(expected, abs=1e-12)


def test_penalty_of_empty_vector():
    assert penalty(PenaltyParams(1.0), np.array([])) == 0.0


def test_penalty_approaches_cardinality():
    x = np.array([0.3, 0.0, -0.7, 1e-2, 0.0])
    a = 1e6
    delta = np.min(np.abs(x[x != 0]))
    gap = abs(penalty(PenaltyParams(a), x) - np.count_nonzero(x))
    assert gap <= x.size / (a * delta + 1)


@given(shapes, finite)
def test_rho_range_and_symmetry(a, t):
    p = PenaltyParams(a)
    v = rho(p, t)
    assert 0.0 <= v < 1.0 or (v == 1.0 and a * abs(t) > 1e15)
    assert v == rho(p, -t)


@given(shapes, finite, finite)
def test_rho_monotone_in_magnitude(a, t1, t2):
    p = PenaltyParams(a)
    lo, hi = sorted([abs(t1), abs(t2)])
    assert rho(p, lo) <= rho(p, hi)


@given(shapes, st.floats(0, 1e3), st.floats(0, 1e3), st.floats(0.01, 0.99))
def test_rho_concave_on_half_line(a, t1, t2, theta):
    p = PenaltyParams(a)
    mid = rho(p, theta * t1 + (1 - theta) * t2)
    assert mid >= theta * rho(p, t1) + (1 - theta) * rho(p, t2) - 1e-12


@given(st.lists(finite, min_size=1, max_size=20), shapes)
def test_penalty_bounds(xs, a):
    x = np.array(xs)
    v = penalty(PenaltyParams(a), x)
    assert 0.0 <= v <= x.size
    assert (v == 0.0) == (not np.any(x))


@pytest.mark.parametrize("a,t,expected", [(1, 1, 0.25), (1, -1, -0.25), (3, 0.5, 0.48)])
def test_rho_derivative_values(a, t, expected):
    assert rho_derivative(PenaltyParams(a), t) == pytest.approx(expected, rel=1e-14)


def test_rho_derivative_rejects_zero():
    with pytest.raises(ValueError):
        rho_derivative(PenaltyParams(1.0), 0.0)


@given(st.floats(0.1, 10), st.floats(1e-3, 10), st.booleans())
def test_rho_derivative_matches_finite_differences(a, mag, negative):
    p = PenaltyParams(a)
    t = -mag if negative else mag
    h = 1e-7 * max(1.0, mag)
    fd = (rho(p, t + h) - rho(p, t - h)) / (2 * h)
    assert fd == pytest.approx(rho_derivative(p, t), rel=1e-5)
