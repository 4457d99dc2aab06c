import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxgrent.entropy import g_rel_entropy, i_div
from maxgrent.linprog import Infeasible, Unbounded, forced_zeros
from maxgrent.model import error_vectors, scale_spec
from maxgrent.solver import (
    DualSolution,
    NonUniqueMaximizer,
    g_tilde,
    kkt_residual,
    perturbed_max_bound,
    prior_transfer,
    round_to_counts,
    solve,
    solve_dual,
    solve_minidiv,
)
from maxgrent.tables import V_HAT, V_STAR, load_fixture

from conftest import make_spec, random_spec

OFF_DIAG = [j for j in range(16) if j not in (0, 5, 10, 15)]


def test_sum_constraint_closed_form():
    spec = make_spec("abc", [2, 1, 1], inequalities=[({"a": 1, "b": 1, "c": 1}, 4, "le")])
    sol = solve(spec)
    assert sol.x_star == pytest.approx([2, 1, 1], rel=1e-8)
    assert sol.g_star == pytest.approx(4 * math.log(4), rel=1e-9)
    assert sol.duals.value == pytest.approx(4 * math.log(4), rel=1e-9)
    # the multiplier of the sum row is ln r
    assert sol.duals.zeta[0] == pytest.approx(math.log(4), rel=1e-8)
    exact = DualSolution(np.zeros(0), np.array([math.log(4)]), 4 * math.log(4))
    assert kkt_residual([2, 1, 1], exact, spec) < 1e-12


def test_m2_toy():
    spec = make_spec("ab", [1, 3], equalities=[({"a": 1, "b": 1}, 4)])
    assert solve(spec).x_star == pytest.approx([1, 3], rel=1e-8)


def test_transport_solution(transport):
    sol = solve(transport)
    assert sol.s_star == pytest.approx(780, abs=0.5)
    assert sol.g_star == pytest.approx(2079.4, abs=0.5)
    assert np.abs(np.array(sol.nu_star.entries) - V_STAR).max() <= 1
    assert kkt_residual(sol.x_star, sol.duals, transport) <= 1e-7 * sol.x_star.max()
    assert not sol.warnings


def test_kkt_residual_detects_perturbation(transport):
    sol = solve(transport)
    x = sol.x_star.copy()
    x[0] += 1.0
    viol = np.abs(transport.A @ x - transport.b).max()
    assert kkt_residual(x, sol.duals, transport) >= viol


@pytest.mark.parametrize(
    "fixture, g, s",
    [("transport_density.json", -23.4, 743.6), ("transport_uniform.json", -7.07, 729.4)],
)
def test_density_fixtures(fixture, g, s):
    sol = solve(load_fixture(fixture))
    assert sol.g_star == pytest.approx(g, abs=0.1)
    assert sol.s_star == pytest.approx(s, abs=0.5)


def test_diagonal_zeros_reinserted():
    spec = load_fixture("transport_diag.json")
    sol = solve(spec)
    assert sol.removed_zeros == {0, 5, 10, 15}
    assert all(sol.x_star[j] == 0.0 for j in sol.removed_zeros)
    assert np.abs(np.array(sol.nu_star.entries)[OFF_DIAG] - V_STAR).max() <= 1


def test_unconstrained_density_is_non_unique():
    spec = make_spec("ab", ["1/4", "3/4"], kind="density")
    with pytest.raises(NonUniqueMaximizer):
        solve(spec)
    sub = make_spec("ab", ["1/4", "3/4"], inequalities=[({"a": 1, "b": 1}, 5, "le")], kind="density")
    with pytest.raises(NonUniqueMaximizer) as info:
        solve(sub)
    assert info.value.chi == pytest.approx([0.25, 0.75])


def test_pinned_density_recovers():
    spec = make_spec("ab", ["1/4", "3/4"], equalities=[({"a": 1, "b": 1}, 8)], kind="density")
    sol = solve(spec)
    assert sol.x_star == pytest.approx([2, 6], rel=1e-8)
    assert sol.g_star == pytest.approx(0, abs=1e-9)


def test_errors():
    with pytest.raises(Unbounded, match="unbounded"):
        solve(make_spec("ab", [1, 2], inequalities=[({"a": 1, "b": -1}, 1, "le")]))
    with pytest.raises(Unbounded):
        solve(make_spec("ab", [1, 2]))
    bad = make_spec("ab", [1, 1], equalities=[({"a": 1}, 3)], inequalities=[({"a": 1}, 2, "le")])
    with pytest.raises(Infeasible):
        solve(bad)


def test_round_to_counts():
    assert round_to_counts([1.3, 2.5, 0.2]).entries == (1, 3, 0)
    assert round_to_counts([4.0, 7.0]).entries == (4, 7)
    assert round_to_counts([0.5, 1.5, 2.49999]).entries == (1, 2, 2)


@settings(max_examples=200)
@given(st.lists(st.floats(0.01, 1e4), min_size=2, max_size=12))
def test_rounding_inequalities(xs):
    x = np.array(xs)
    v = np.array(round_to_counts(x).entries, dtype=float)
    m, n, s = x.size, v.sum(), x.sum()
    assert abs(n - s) <= m / 2 + 1e-9
    assert np.abs(v - x).max() <= 0.5 + 1e-12
    assert np.abs(v - x).sum() <= m / 2 + 1e-9
    if n > 0:
        assert np.abs(v / n - x / s).sum() <= m / n + 1e-12


def test_minidiv_unconstrained():
    spec = make_spec("abc", [1, 2, 3])
    res = solve_minidiv(spec)
    assert res.u_star == pytest.approx([1, 2, 3])
    assert res.d_min == pytest.approx(0, abs=1e-15)


def test_minidiv_transport(transport):
    res = solve_minidiv(transport)
    v_hat = np.array(round_to_counts(res.u_star).entries)
    assert np.abs(v_hat - V_HAT).max() <= 1
    assert g_rel_entropy(res.u_star, transport.prior.values) == pytest.approx(485.6, abs=0.5)
    assert np.abs(res.u_star - solve(transport).x_star).max() == pytest.approx(79.93, abs=0.05)
    # complementary slackness and primal feasibility
    assert np.abs(transport.A @ res.u_star - transport.b).max() < 1e-6
    assert np.all(transport.C @ res.u_star <= transport.d + 1e-6)
    assert np.abs(res.duals.zeta * (transport.C @ res.u_star - transport.d)).max() < 1e-6


def test_minidiv_large_prior_approaches_maxgrent(transport):
    x = solve(transport).x_star
    gap1 = np.abs(solve_minidiv(transport).u_star - x).max()
    gap100 = np.abs(solve_minidiv(transport.with_prior(transport.prior.scaled(100))).u_star - x).max()
    assert gap100 < gap1 / 5


def test_prior_transfer_round_trips(transport):
    sol = solve(transport)
    u = solve_minidiv(prior_transfer(sol, transport, "maxgrent-to-minidiv")).u_star
    assert np.abs(u - sol.x_star).max() <= 1e-5 * sol.x_star.max()
    mini = solve_minidiv(transport)
    back = solve(prior_transfer(mini, transport, "minidiv-to-maxgrent"))
    assert np.abs(back.x_star - mini.u_star).max() <= 1e-5 * mini.u_star.max()
    with pytest.raises(ValueError):
        prior_transfer(sol, transport, "sideways")


def test_perturbed_bound(transport):
    sol = solve(transport)
    assert perturbed_max_bound(sol, 0.0) == sol.g_star
    bt, dt = np.abs(transport.b), np.abs(transport.d)
    assert g_tilde(sol) >= sol.g_star
    assert perturbed_max_bound(sol, 0.01) == pytest.approx(sol.g_star + 0.01 * g_tilde(sol))
    assert perturbed_max_bound(sol, 0.01, bt, dt) == pytest.approx(sol.g_star + 0.01 * g_tilde(sol))


def _widened(spec, delta):
    """C(delta) written as an ordinary spec (equalities become two-sided rows)."""
    names = spec.variable_names
    bt, dt = error_vectors(spec)
    ins = []
    for row, w in zip(spec.equalities, bt):
        coeffs = {names[j]: float(a) for j, a in row.coeffs}
        ins.append((coeffs, float(row.rhs) + delta * w, "le"))
        ins.append((coeffs, float(row.rhs) - delta * w, "ge"))
    for row, w in zip(spec.inequalities, dt):
        ins.append(({names[j]: float(a) for j, a in row.coeffs}, float(row.rhs) + delta * w, "le"))
    return make_spec(names, [float(q) for q in spec.prior.exact], inequalities=ins, kind=spec.prior.kind)


@pytest.mark.parametrize("delta", [0.001, 0.01, 0.05])
def test_perturbed_bound_dominates_widened_optimum(transport, delta):
    sol = solve(transport)
    wide = solve(_widened(transport, delta))
    assert wide.g_star >= sol.g_star - 1e-6
    assert wide.g_star <= perturbed_max_bound(sol, delta) + 1e-6


@pytest.mark.parametrize("seed", range(8))
def test_uniqueness_probe(seed):
    spec = random_spec(np.random.default_rng(seed), density=False)
    base = solve(spec)
    rng = np.random.default_rng(1000 + seed)
    for _ in range(10):
        start = rng.uniform(0, 2, size=len(spec.equalities) + len(spec.inequalities))
        again = solve(spec, start=start)
        assert np.abs(again.x_star - base.x_star).max() <= 1e-6 * max(1.0, base.x_star.max())


@pytest.mark.parametrize("seed", range(20))
def test_boundary_location(seed):
    spec = random_spec(np.random.default_rng(seed), density=False)
    sol = solve(spec)
    x = sol.x_star
    slack = spec.d - spec.C @ x
    active = np.any(np.abs(slack) <= 1e-6 * (1 + np.abs(spec.d)))
    assert active or len(spec.equalities) > 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dual_activity(seed):
    spec = random_spec(np.random.default_rng(seed))
    sol = solve(spec)
    assert abs(sol.duals.activity) <= 1e-8
    val = sol.duals.lam @ spec.b + sol.duals.zeta @ spec.d
    assert abs(sol.g_star - val) <= 1e-7 * (1 + abs(sol.g_star))


def test_grid_oracle_m3():
    spec = make_spec(
        "abc",
        [1, 2, 3],
        equalities=[({"a": 1, "b": 1, "c": 1}, 6)],
        inequalities=[({"c": 1}, 2, "le"), ({"a": 1, "b": -1}, 1, "le")],
    )
    sol = solve(spec)
    t = np.arange(0, 6.0005, 0.002)
    a, b = np.meshgrid(t, t, indexing="ij")
    c = 6 - a - b
    ok = (c >= 0) & (c <= 2) & (a - b <= 1)
    xs = np.stack([a[ok], b[ok], c[ok]], axis=1)
    from maxgrent._kernels import g_rel_batch

    best = g_rel_batch(xs, np.log([1.0, 2.0, 3.0])).max()
    assert best <= sol.g_star + 1e-9
    assert sol.g_star - best <= 1e-4


@pytest.mark.parametrize("c", [2, 5])
def test_scaled_duals_invariant(transport, c):
    base, big = solve(transport), solve(scale_spec(transport, c))
    assert np.abs(big.duals.z - base.duals.z).max() <= 1e-5
    assert big.g_star == pytest.approx(c * base.g_star, rel=1e-5)


def test_solve_dual_rejects_infeasible():
    bad = make_spec("ab", [1, 1], equalities=[({"a": 1}, 3)], inequalities=[({"a": 1}, 2, "le")])
    with pytest.raises(Infeasible):
        solve_dual(bad)
    assert forced_zeros(make_spec("ab", [1, 1], equalities=[({"a": 1}, 0)], inequalities=[({"b": 1}, 2, "le")])) == {0}


def test_minidiv_value_matches_primal(transport):
    res = solve_minidiv(transport)
    assert res.duals.value == pytest.approx(i_div(res.u_star, transport.prior.values), rel=1e-7)
