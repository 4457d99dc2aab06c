import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from maxgrent.entropy import (
    basic_bounds,
    density_decomposition,
    g_entropy,
    g_rel_entropy,
    hypercube_bounds,
    i_div,
    kl_div,
)

pos = st.floats(0.01, 50, allow_nan=False)
vec3 = arrays(np.float64, 3, elements=pos)


def test_g_entropy_values():
    assert g_entropy([2, 2]) == pytest.approx(4 * math.log(2), abs=1e-12)
    assert g_entropy([0, 0, 0]) == 0.0
    assert g_entropy([2, 0, 4]) == pytest.approx(3.819085, abs=1e-6)
    with pytest.raises(ValueError):
        g_entropy([1, -1])


def test_g_rel_entropy_values():
    assert g_rel_entropy([1, 1], [1, 1]) == pytest.approx(2 * math.log(2))
    assert g_rel_entropy([1, 2, 3], [1, 1, 1]) == pytest.approx(g_entropy([1, 2, 3]))
    assert g_rel_entropy([2, 2], [3, 1]) == pytest.approx(4.969813, abs=1e-6)
    with pytest.raises(ValueError):
        g_rel_entropy([1, 1], [1, 0])
    with pytest.raises(ValueError):
        g_rel_entropy([1, 1], [1, 1, 1])


def test_i_div_values():
    assert i_div([3, 1, 4], [3, 1, 4]) == pytest.approx(0.0, abs=1e-15)
    assert i_div([1, 1], [2, 2]) == pytest.approx(2 - 2 * math.log(2))
    assert i_div([0, 2], [1, 1]) == pytest.approx(2 * math.log(2))
    with pytest.raises(ValueError):
        i_div([1, 1], [0, 1])


@given(vec3, vec3)
def test_i_div_nonnegative(u, v):
    assert i_div(u, v) >= -1e-12


def test_basic_bounds_values():
    lo, hi = basic_bounds([1, 1], [2, 4])
    assert (lo, hi) == pytest.approx((2 * math.log(2), 2 * math.log(6)))
    g = g_rel_entropy([1, 1], [2, 4])
    assert g == pytest.approx(5 * math.log(2))
    assert lo <= g <= hi
    assert basic_bounds([0, 0], [2, 3]) == (0.0, 0.0)


@given(vec3, vec3)
def test_basic_bounds_bracket(x, y):
    lo, hi = basic_bounds(x, y)
    g = g_rel_entropy(x, y)
    assert lo - 1e-9 * (1 + abs(lo)) <= g <= hi + 1e-9 * (1 + abs(hi))


def test_hypercube_values():
    # equal entries: the curvature term vanishes, leaving -g*zeta and +g*zeta
    g = 2 * math.log(2)
    assert hypercube_bounds([2.0, 2.0], 1.5, [1, 1]) == pytest.approx((-g * 1.5, g * 1.5))
    lo, hi = hypercube_bounds([2.0, 4.0], 1e-9, [1, 1])
    assert abs(lo) < 1e-8 and abs(hi) < 1e-8
    with pytest.raises(ValueError):
        hypercube_bounds([2.0, 0.4], 0.5, [1, 1])


def test_hypercube_grid():
    x, mu, z = np.array([2.0, 4.0]), np.array([1.0, 1.0]), 0.5
    lo, hi = hypercube_bounds(x, z, mu)
    g0 = g_rel_entropy(x, mu)
    t = np.linspace(-z, z, 100)
    for a in t:
        for b in t:
            d = g_rel_entropy(x + [a, b], mu) - g0
            assert lo - 1e-12 <= d <= hi + 1e-12


def test_density_decomposition_values():
    dd = density_decomposition([1, 3], [2, 2])
    assert (dd.s, dd.t) == (4.0, 4.0)
    assert dd.div == pytest.approx(0.130812, abs=1e-6)
    same = density_decomposition([1, 2, 3], [1, 2, 3])
    assert same.div == pytest.approx(0.0, abs=1e-15)
    assert same.g == pytest.approx(6 * math.log(6))


@settings(max_examples=200)
@given(vec3, vec3)
def test_density_identity_and_pinsker(x, y):
    dd = density_decomposition(x, y)
    g = g_rel_entropy(x, y)
    assert dd.g == pytest.approx(g, rel=1e-9, abs=1e-9)
    assert abs(dd.chi.sum() - 1) <= 1e-12 and abs(dd.psi.sum() - 1) <= 1e-12
    lo, hi = dd.pinsker_bounds()
    assert lo - 1e-9 * (1 + abs(lo)) <= g <= hi + 1e-9 * (1 + abs(hi))


@given(vec3, vec3)
def test_density_pair_identity(x, y):
    p, q = x / x.sum(), y / y.sum()
    assert g_rel_entropy(p, q) == pytest.approx(-kl_div(p, q), abs=1e-12)


@given(vec3, vec3, vec3, st.floats(0, 1))
def test_concavity(x1, x2, y, lam):
    mid = g_rel_entropy(lam * x1 + (1 - lam) * x2, y)
    assert mid >= lam * g_rel_entropy(x1, y) + (1 - lam) * g_rel_entropy(x2, y) - 1e-9 * (1 + abs(mid))
