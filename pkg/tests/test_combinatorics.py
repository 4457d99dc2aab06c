import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxgrent._kernels import EnumerationCapExceeded
from maxgrent.combinatorics import (
    argmax_realizations,
    classify,
    enumerate as enumerate_vectors,
    enumerate_points,
    exact_ratio,
    log_exact_ratio,
    log_stirling_factor,
    multinomial,
    probability,
    realizations,
    stirling_factor,
)
from maxgrent.entropy import g_entropy
from maxgrent.linprog import SumRange
from maxgrent.model import CountVector, Prior, in_region
from maxgrent.solver import solve

from conftest import make_spec, random_spec

ones3 = Prior.from_values([1, 1, 1], "count")


def test_realizations_values():
    assert realizations((3, 1, 5), ones3).value == 504
    r = realizations((4, 0, 6), Prior.from_values([3, 3, 3], "count"))
    assert r.value == 12_400_290 and r.path == "exact"
    assert realizations((0, 0, 0), ones3).value == 1
    assert abs(r.log_value - math.log(12_400_290)) <= 1e-9


def test_realizations_log_path():
    mu = Prior.from_values(["0.2", "0.3", "0.5"], "density")
    r = realizations((2, 3, 1), mu)
    assert r.value is None and r.path == "log"
    expected = math.log(multinomial((2, 3, 1)) * 0.2**2 * 0.3**3 * 0.5)
    assert r.log_value == pytest.approx(expected, rel=1e-12)
    with pytest.raises(ValueError):
        int(r)
    with pytest.raises(ValueError):
        realizations((1, 1), mu)


def test_probability_values():
    assert probability((1, 1), Prior.from_values(["1/2", "1/2"], "density")) == Fraction(1, 2)
    mu = Prior.from_values(["1/5", "3/5", "1/5"], "density")
    assert probability((1, 3, 3), mu) == Fraction(3780, 5**7)
    assert probability((1, 3, 3), Prior.from_values([1, 3, 1], "count")) == Fraction(3780, 5**7)
    with pytest.raises(ValueError):
        probability((1, 1), Prior.from_values(["1/2", "2/3"], "general"))


@pytest.mark.parametrize("m, n", [(2, 7), (3, 6), (4, 5)])
def test_probability_normalizes(m, n):
    mu = Prior.from_values([Fraction(k + 1, m * (m + 1) // 2) for k in range(m)], "density")
    total = sum(probability(nu, mu) for nu in itertools.product(range(n + 1), repeat=m) if sum(nu) == n)
    assert total == 1


def test_stirling_values():
    assert stirling_factor((1, 1)) == pytest.approx(1 / math.sqrt(math.pi))
    s = stirling_factor((1, 1)) * math.exp(g_entropy((1, 1)))
    assert math.exp(-2 / 12) * s <= 2 <= s
    with pytest.raises(ValueError):
        stirling_factor((0, 2))


@given(st.lists(st.integers(1, 20), min_size=2, max_size=5), st.integers(2, 6))
def test_stirling_scaling(nu, c):
    m = len(nu)
    lhs = log_stirling_factor([c * v for v in nu])
    assert lhs == pytest.approx(log_stirling_factor(nu) - (m - 1) / 2 * math.log(c), abs=1e-12)


def test_realization_sandwich_integer_priors():
    for m in (2, 3):
        for mu_vals in itertools.product(range(1, 5), repeat=m):
            mu = Prior.from_values(mu_vals, "count")
            for nu in itertools.product(range(1, 7), repeat=m):
                if sum(nu) > 9:
                    continue
                val = realizations(nu, mu).value
                g = -sum(v * math.log(v / q) for v, q in zip(nu, mu_vals)) + sum(nu) * math.log(sum(nu))
                hi = math.exp(log_stirling_factor(nu) + g)
                assert math.exp(-m / 12) * hi <= val * (1 + 1e-9)
                assert val <= hi * (1 + 1e-9)


def test_example21_universe(example21):
    pts = enumerate_vectors(example21, 0, SumRange.from_sums(4, 10, 3))
    assert len(pts) == 25
    assert pts == sorted(pts, key=lambda p: p.entries)
    brute = [p for p in itertools.product(range(11), repeat=3) if p[0] + p[1] == 4 and p[1] + p[2] <= 6]
    assert [p.entries for p in pts] == sorted(brute)


def test_argmax_ties(example21):
    pts = enumerate_vectors(example21, 0, SumRange.from_sums(4, 10, 3))
    win, best = argmax_realizations(pts, Prior.from_values([1, 3, 1], "count"))
    assert best == 3780
    assert sorted(p.entries for p in win) == [(1, 3, 3), (2, 2, 4)]


def test_enumerate_infeasible_and_monotone(example21):
    bad = make_spec("ab", [1, 1], equalities=[({"a": 1, "b": 1}, 4)], inequalities=[({"a": 1, "b": 1}, 3, "le")])
    assert enumerate_points(bad, 0, SumRange.from_sums(0, 5, 2)).shape[0] == 0
    rng = SumRange.from_sums(4, 10, 3)
    sizes = [len(enumerate_points(example21, d, rng)) for d in (0, 0.1, 0.25, 0.5)]
    assert sizes == sorted(sizes)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0, Fraction(1, 10), Fraction(3, 10)]))
def test_enumeration_matches_brute_force(seed, delta):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, m=int(rng.integers(2, 4)))
    r = SumRange.from_sums(0, 14, spec.m)
    pts = enumerate_points(spec, delta, r)
    got = {tuple(p) for p in pts}
    want = {
        p
        for p in itertools.product(range(r.n2 + 1), repeat=spec.m)
        if r.n1 <= sum(p) <= r.n2 and in_region(np.array(p, float), spec, float(delta))
    }
    # exact membership may only differ from the 1e-9-slack float test on the boundary
    assert got <= want
    for p in want - got:
        assert not in_region(np.array(p, float), spec, float(delta) - 1e-6)


def test_cap():
    spec = make_spec("abcd", [1, 1, 1, 1], inequalities=[({"a": 1, "b": 1, "c": 1, "d": 1}, 30, "le")])
    with pytest.raises(EnumerationCapExceeded):
        enumerate_points(spec, 0, cap=100)


def test_classify_partition(example21):
    sol = solve(example21)
    pts = enumerate_vectors(example21, 0, SumRange.from_sums(4, 10, 3))
    for mode, par in [("value", 0.05), ("value", 0.3), ("distance", 0.2), ("distance", 0.6)]:
        es = classify(pts, sol, mode, par)
        assert es.size == len(pts)
        assert set(es.members_A).isdisjoint(es.members_B)
        assert es.realizations_A + es.realizations_B == sum(realizations(p, example21.prior).value for p in pts)


def test_classify_extremes(example21):
    sol = solve(example21)
    pts = enumerate_vectors(example21, 0, SumRange.from_sums(4, 10, 3))
    diam = max(np.abs(np.array(p.entries) - sol.x_star).max() for p in pts) / sol.x_star.max()
    es = classify(pts, sol, "distance", diam + 1e-9)
    assert not es.members_B
    assert exact_ratio(sol, es) == (math.inf, (504, 0))
    assert log_exact_ratio(sol, es) == math.inf
    with pytest.raises(ValueError):
        classify(pts, sol, "value", 1.5)
    with pytest.raises(ValueError):
        classify(pts, sol, "nearby", 0.1)


def test_exact_ratio_example21(example21):
    sol = solve(example21)
    assert sol.nu_star.entries == (3, 1, 5)
    pts = enumerate_vectors(example21, 0, SumRange.from_sums(4, 10, 3))
    es = classify(pts, sol, "distance", 0.5)
    ratio, (num, den) = exact_ratio(sol, es)
    assert num == 504
    assert den == sum(realizations(p, example21.prior).value for p in es.members_B)
    assert ratio == float(Fraction(num, den))
    assert log_exact_ratio(sol, es) == pytest.approx(math.log(ratio))


def test_minidiv_in_b_for_transport_eta():
    # eta below 1 - G(v_hat)/G* puts the MINIDIV point outside A
    from maxgrent.entropy import g_rel_entropy
    from maxgrent.solver import round_to_counts, solve_minidiv
    from maxgrent.tables import load_fixture

    spec = load_fixture("transport.json")
    sol = solve(spec)
    v_hat = round_to_counts(solve_minidiv(spec).u_star)
    g_hat = g_rel_entropy(v_hat.as_array(), spec.prior.values)
    cut = 1 - g_hat / sol.g_star
    assert cut == pytest.approx(0.7669, abs=5e-4)
    assert classify([v_hat], sol, "value", cut - 0.01).members_B == (v_hat,)
    assert classify([v_hat], sol, "value", cut + 0.01).members_A == (v_hat,)


def test_multinomial_matches_factorials():
    for nu in itertools.product(range(5), repeat=3):
        assert multinomial(nu) == math.factorial(sum(nu)) // math.prod(math.factorial(v) for v in nu)
    assert multinomial(CountVector((2, 2))) == 6
