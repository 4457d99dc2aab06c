"""MAXGRENT and MINIDIV solvers.

MAXGRENT is solved through its Lagrange dual

    minimize     b.lam + d.xi
    subject to   LSE(log mu - A^T lam - C^T xi) <= 0,   xi >= 0,

with a log-barrier / damped-Newton continuation, followed by an active-set
Newton polish on the KKT system.  The dual has one variable per constraint,
so every linear solve is tiny.  MINIDIV is handled the same way on the smooth
dual of the I-divergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .entropy import g_rel_entropy, kl_div
from .linprog import Infeasible, Unbounded, feasible, forced_zeros, lp_optimize, simplex
from .model import (
    CountVector,
    LinearConstraint,
    Prior,
    ProblemSpec,
    as_fraction,
    error_vectors,
)

__all__ = [
    "SolverError",
    "NonConvergence",
    "NonUniqueMaximizer",
    "DualSolution",
    "Solution",
    "MinidivSolution",
    "solve_dual",
    "recover_primal",
    "solve",
    "round_to_counts",
    "kkt_residual",
    "solve_minidiv",
    "prior_transfer",
    "g_tilde",
    "perturbed_max_bound",
]

BARRIER_SCHEDULE = tuple(10.0 ** (-2 * k) for k in range(6))  # 1 .. 1e-10
MAX_NEWTON = 500
ARMIJO = 1e-4
EPS0 = 1e-3
GRAD_TOL = 1e-10
ACTIVE_TOL = 1e-8
KKT_TOL = 1e-7


class SolverError(RuntimeError):
    pass


class NonConvergence(SolverError):
    pass


class NonUniqueMaximizer(SolverError):
    """The maximizer is not unique; only the optimal density is determined."""

    def __init__(self, chi, message="maximizer is not unique (G* = 0 is attained)"):
        super().__init__(message)
        self.chi = np.asarray(chi, dtype=float)


@dataclass(frozen=True)
class DualSolution:
    """Optimal multipliers; ``value`` is ``G* = lam.b + zeta.d``."""

    lam: np.ndarray
    zeta: np.ndarray
    value: float
    grad_norm: float = 0.0
    activity: float = 0.0
    theta: float = float("nan")

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.lam, self.zeta])


@dataclass(frozen=True)
class Solution:
    x_star: np.ndarray
    chi_star: np.ndarray
    s_star: float
    g_star: float
    duals: DualSolution
    nu_star: CountVector
    n_star: int
    removed_zeros: frozenset
    spec: ProblemSpec
    reduced_spec: ProblemSpec
    support: tuple
    warnings: tuple = ()

    @property
    def x_reduced(self) -> np.ndarray:
        return self.x_star[list(self.support)]

    @property
    def m_eff(self) -> int:
        return len(self.support)


@dataclass(frozen=True)
class MinidivSolution:
    u_star: np.ndarray
    duals: DualSolution
    spec: ProblemSpec
    removed_zeros: frozenset = frozenset()

    @property
    def d_min(self) -> float:
        from .entropy import i_div

        sup = [j for j in range(self.spec.m) if j not in self.removed_zeros]
        return i_div(self.u_star[sup], self.spec.prior.values[sup])


# ------------------------------------------------------------ reduction


def _reduce(spec: ProblemSpec, zeros):
    """Drop forced-zero columns; returns reduced spec and row maps."""
    support = tuple(j for j in range(spec.m) if j not in zeros)
    if len(zeros) == 0:
        return spec, support, list(range(len(spec.equalities))), list(range(len(spec.inequalities)))
    new_index = {j: k for k, j in enumerate(support)}

    def shrink(rows):
        kept, out = [], []
        for r, c in enumerate(rows):
            co = tuple((new_index[j], a) for j, a in c.coeffs if j in new_index)
            if co:
                kept.append(r)
                out.append(LinearConstraint(co, c.rhs, c.sense))
        return kept, tuple(out)

    keq, eqs = shrink(spec.equalities)
    kin, ineqs = shrink(spec.inequalities)
    prior = Prior(tuple(spec.prior.exact[j] for j in support), "general")
    names = tuple(spec.variable_names[j] for j in support)
    if len(names) < 2:
        raise SolverError("fewer than 2 variables remain after removing forced zeros")
    red = ProblemSpec(names, prior, eqs, ineqs, spec.tolerance)
    return red, support, keq, kin


def _independent_rows(rows):
    """Indices of a maximal linearly independent prefix-greedy subset (exact)."""
    basis = []  # (pivot column, reduced row)
    keep = []
    for i, row in enumerate(rows):
        r = list(row)
        for col, b in basis:
            if r[col] != 0:
                f = r[col] / b[col]
                r = [u - f * v for u, v in zip(r, b)]
        piv = next((j for j, v in enumerate(r) if v != 0), None)
        if piv is not None:
            basis.append((piv, r))
            keep.append(i)
    return keep


def _canonical(spec: ProblemSpec):
    """Rewrite implicitly tight inequalities as equalities and drop dependent rows.

    This restores a strictly feasible point relative to the equality set, so
    the dual optimum is attained and unique.  Returns ``(canon, eq_src,
    in_src)``: each canonical equality comes from ``("eq", r)`` or
    ``("in", k)``; ``in_src`` lists the surviving inequality indices.
    """
    tight = []
    for k, c in enumerate(spec.inequalities):
        row = c.row(spec.m)
        lo, _ = lp_optimize(row, spec, "min")
        if float(c.rhs) - lo <= 1e-9 * (1 + abs(float(c.rhs))):
            tight.append(k)
    if not tight and len(spec.equalities) <= 1:
        return spec, [("eq", r) for r in range(len(spec.equalities))], list(range(len(spec.inequalities)))
    cand = [("eq", r, c) for r, c in enumerate(spec.equalities)] + [("in", k, spec.inequalities[k]) for k in tight]

    def dense(c):
        r = [Fraction(0)] * spec.m
        for j, a in c.coeffs:
            r[j] = a
        return r

    keep = _independent_rows([dense(c) for _, _, c in cand])
    if len(keep) == len(spec.equalities) and not tight:
        return spec, [("eq", r) for r in range(len(spec.equalities))], list(range(len(spec.inequalities)))
    eqs = tuple(LinearConstraint(cand[i][2].coeffs, cand[i][2].rhs, "eq") for i in keep)
    eq_src = [(cand[i][0], cand[i][1]) for i in keep]
    in_src = [k for k in range(len(spec.inequalities)) if k not in tight]
    ineqs = tuple(spec.inequalities[k] for k in in_src)
    return ProblemSpec(spec.variable_names, spec.prior, eqs, ineqs, spec.tolerance), eq_src, in_src


def _expand_duals(z_eq, z_in, eq_src, in_src, n_eq, n_in):
    lam = np.zeros(n_eq)
    zeta = np.zeros(n_in)
    for v, (kind, r) in zip(z_eq, eq_src):
        if kind == "eq":
            lam[r] = v
        else:
            zeta[r] = v
    for v, k in zip(z_in, in_src):
        zeta[k] = v
    return lam, zeta


def _nonneg_duals(spec: ProblemSpec, lam, zeta, in_src):
    """Re-express multipliers with ``zeta >= 0`` keeping ``A^T lam + C^T zeta``.

    Folding tight inequalities into equalities leaves their multipliers free
    in sign.  For linear constraints a nonnegative representation of the same
    exponent vector always exists; it is found by a small LP over the tight
    rows.  Returns ``None`` if the LP fails.
    """
    if not np.any(zeta < 0):
        return lam, zeta
    tight = [k for k in range(len(spec.inequalities)) if k not in set(in_src)]
    A, C = spec.A, spec.C
    target = A.T @ lam + C.T @ zeta
    loose = [k for k in range(len(spec.inequalities)) if k not in tight]
    rhs = target - C[loose].T @ zeta[loose]
    Ct = C[tight]
    p = A.shape[0]
    G = np.hstack([A.T, -A.T, Ct.T])
    res = simplex(np.ones(G.shape[1]), A_eq=G, b_eq=rhs)
    if res.status != "optimal" or np.abs(G @ res.x - rhs).max() > 1e-9 * (1 + np.abs(rhs).max()):
        return None
    lam2 = res.x[:p] - res.x[p : 2 * p]
    zeta2 = zeta.copy()
    zeta2[tight] = res.x[2 * p :]
    return lam2, zeta2


# ------------------------------------------------------------ barrier core


def _direction(M_eq, M_in, strong: bool):
    """LP start direction: ``M^T z >= 1`` (strong) or ``>= 0``, sum 1 (weak)."""
    p, q = M_eq.shape[0], M_in.shape[0]
    m = M_eq.shape[1] if p else M_in.shape[1]
    # variables (lam+, lam-, xi) >= 0; constraint  -(A^T lam + C^T xi) <= -1
    G = np.hstack([M_eq.T, -M_eq.T, M_in.T])
    c = np.zeros(2 * p + q)
    if strong:
        res = simplex(c, A_ub=-G, b_ub=-np.ones(m))
    else:
        res = simplex(c, A_eq=np.ones((1, m)) @ G, b_eq=[1.0], A_ub=-G, b_ub=np.zeros(m))
    if res.status != "optimal":
        return None
    v = res.x
    return np.concatenate([v[:p] - v[p : 2 * p], v[2 * p :]])


class _MaxgrentDual:
    """Barrier function pieces for the MAXGRENT dual."""

    def __init__(self, spec: ProblemSpec):
        self.M = np.vstack([spec.A, spec.C])
        self.w = np.concatenate([spec.b, spec.d])
        self.p = spec.A.shape[0]
        self.q = spec.C.shape[0]
        self.logmu = np.log(spec.prior.values)

    def lse(self, z):
        a = self.logmu - self.M.T @ z
        L = logsumexp(a)
        return L, np.exp(a - L)

    def feasible(self, z):
        if np.any(z[self.p :] <= 0):
            return False
        return self.lse(z)[0] < 0

    def phi(self, z, tau):
        L, _ = self.lse(z)
        if L >= 0 or np.any(z[self.p :] <= 0):
            return math.inf
        return float(self.w @ z - tau * math.log(-L) - tau * np.log(z[self.p :]).sum())

    def derivs(self, z, tau):
        L, pr = self.lse(z)
        u = -L
        Mp = self.M @ pr
        gradL = -Mp
        hessL = (self.M * pr) @ self.M.T - np.outer(Mp, Mp)
        g = self.w + tau * gradL / u
        H = tau * (hessL / u + np.outer(gradL, gradL) / u**2)
        xi = z[self.p :]
        g[self.p :] -= tau / xi
        H[self.p :, self.p :] += np.diag(tau / xi**2)
        return g, H


def _newton_solve(H, g):
    try:
        step = np.linalg.solve(H, -g)
        if np.all(np.isfinite(step)):
            return step
    except np.linalg.LinAlgError:
        pass
    return np.linalg.lstsq(H, -g, rcond=None)[0]


def _schedule(obj):
    """Barrier weights relative to the size of the dual objective."""
    scale = max(1.0, float(np.abs(obj.w).max(initial=0.0)) / 100.0)
    return tuple(scale * t for t in BARRIER_SCHEDULE)


def _barrier(obj, z, taus):
    gnorm = math.inf
    for tau in taus:
        f = obj.phi(z, tau)
        for it in range(MAX_NEWTON):
            g, H = obj.derivs(z, tau)
            gnorm = float(np.linalg.norm(g))
            step = _newton_solve(H, g)
            dec = float(-g @ step)
            if dec <= 1e-12 * max(1.0, abs(f)) or gnorm <= GRAD_TOL:
                break
            t = 1.0
            while t > 1e-14:
                zn = z + t * step
                fn = obj.phi(zn, tau)
                if fn <= f - ARMIJO * t * dec:
                    break
                t *= 0.5
            else:
                break
            moved = t * float(np.abs(step).max())
            z, f = zn, fn
            if moved <= 1e-15 * (1.0 + float(np.abs(z).max())):
                break  # stalled at rounding level; the polish finishes the job
        else:
            raise NonConvergence(f"barrier stage tau={tau:g} hit {MAX_NEWTON} Newton steps")
    return z, gnorm


def _start_point(spec: ProblemSpec, obj: _MaxgrentDual, start=None):
    M_eq, M_in = spec.A, spec.C
    strong = _direction(M_eq, M_in, True)
    if strong is None:
        weak = _direction(M_eq, M_in, False)
        if weak is None:
            return None
        zdir = weak
    else:
        zdir = strong
    base = np.zeros(obj.p + obj.q) if start is None else np.asarray(start, dtype=float).copy()
    base[obj.p :] = np.maximum(base[obj.p :], 0.0) + EPS0
    kappa = 1.0
    for _ in range(200):
        z = base + kappa * zdir
        if obj.feasible(z):
            return z
        kappa *= 2.0
    return None


# ------------------------------------------------------------ polish


def _polish_maxgrent(obj: _MaxgrentDual, z, theta):
    """Active-set Newton on ``w_S = theta M_S p(z)``, ``LSE = 0``."""
    p, q = obj.p, obj.q
    L, pr = obj.lse(z)
    x = theta * pr
    slack = obj.w[p:] - obj.M[p:] @ x if q else np.zeros(0)
    xi = z[p:]
    act = [k for k in range(q) if xi[k] > 1e-7 or slack[k] < 1e-6 * (1 + abs(obj.w[p + k]))]
    for _attempt in range(q + 2):
        S = list(range(p)) + [p + k for k in act]
        zz = z.copy()
        zz[p:] = 0.0
        zz[S[p:]] = np.maximum(z[S[p:]], 0.0)
        th = theta
        MS = obj.M[S]
        wS = obj.w[S]
        ok = False
        for _ in range(60):
            a = obj.logmu - obj.M.T @ zz
            Lz = logsumexp(a)
            pz = np.exp(a - Lz)
            MSp = MS @ pz
            F = np.concatenate([wS - th * MSp, [Lz]])
            res = float(np.abs(F).max())
            if res < 1e-13 * max(1.0, np.abs(obj.w).max(initial=1.0)):
                ok = True
                break
            Sig = (MS * pz) @ MS.T - np.outer(MSp, MSp)
            J = np.zeros((len(S) + 1, len(S) + 1))
            J[: len(S), : len(S)] = th * Sig
            J[: len(S), -1] = -MSp
            J[-1, : len(S)] = -MSp
            step = _newton_solve(J, F)
            t = 1.0
            while t > 1e-10:
                zn = zz.copy()
                zn[S] = zz[S] + t * step[:-1]
                thn = th + t * step[-1]
                an = obj.logmu - obj.M.T @ zn
                Ln = logsumexp(an)
                pn = np.exp(an - Ln)
                Fn = np.concatenate([wS - thn * (MS @ pn), [Ln]])
                if np.abs(Fn).max() < res or t < 1e-3:
                    break
                t *= 0.5
            zz, th = zn, thn
        if not ok or th <= 0:
            return None
        xi_new = zz[p:]
        neg = [k for k in act if xi_new[k] < -1e-10]
        x_new = th * np.exp(obj.logmu - obj.M.T @ zz)
        viol = [k for k in range(q) if k not in act and obj.M[p + k] @ x_new > obj.w[p + k] + 1e-9 * (1 + abs(obj.w[p + k]))]
        if not neg and not viol:
            zz[p:] = np.maximum(zz[p:], 0.0)
            return zz, th
        act = sorted((set(act) - set(neg)) | set(viol))
    return None


# ------------------------------------------------------------ public API


def solve_dual(spec: ProblemSpec, start=None) -> DualSolution:
    """Maximize ``-b.lam - d.xi`` over the dual feasible set.

    ``spec`` must have its forced zeros removed.  ``start`` optionally seeds
    the multipliers (it is shifted along a feasible direction if needed).
    """
    if not feasible(spec):
        raise Infeasible("constraint set is empty")
    obj = _MaxgrentDual(spec)
    if obj.p + obj.q == 0:
        r = spec.prior.r
        if r <= 1.0 + 1e-12:
            raise NonUniqueMaximizer(spec.prior.psi)
        raise Unbounded("no constraints bound the sum; G(x||y) is unbounded")
    z0 = _start_point(spec, obj, start)
    if z0 is None:
        if spec.prior.r <= 1.0 + 1e-12:
            raise NonUniqueMaximizer(spec.prior.psi)
        raise Unbounded("sum of x is unbounded over the constraints; G(x||y) is unbounded")
    taus = _schedule(obj)
    z, gnorm = _barrier(obj, z0, taus)
    L, pr = obj.lse(z)
    theta = taus[-1] / (-L)
    pol = _polish_maxgrent(obj, z, theta)
    if pol is not None:
        z, theta = pol
        gnorm = 0.0
    L, pr = obj.lse(z)
    x = theta * pr
    F = obj.w - obj.M @ x
    F[obj.p :] = np.where(z[obj.p :] > 0, F[obj.p :], np.minimum(F[obj.p :], 0.0))
    gnorm = float(np.linalg.norm(F))
    if abs(L) > ACTIVE_TOL:
        raise NonConvergence(f"dual constraint not active at the optimum (LSE = {L:.3g})")
    lam, zeta = z[: obj.p].copy(), z[obj.p :].copy()
    value = float(lam @ spec.b + zeta @ spec.d)
    return DualSolution(lam, zeta, value, gnorm, float(L), float(theta))


def round_to_counts(x_star) -> CountVector:
    """Nearest-integer rounding with halves rounded away from zero."""
    x = np.asarray(x_star, dtype=float)
    return CountVector(tuple(int(v) for v in np.floor(np.abs(x) + 0.5) * np.sign(x)))


def _mult_exponent(duals: DualSolution, spec: ProblemSpec):
    return spec.A.T @ duals.lam + spec.C.T @ duals.zeta


def _ray_interval(chi, spec: ProblemSpec):
    """Feasible ``s >= 0`` with ``s chi`` in C(0), as ``(lo, hi)``."""
    lo, hi = 0.0, math.inf
    for a, b, eq in [(a, b, True) for a, b in zip(spec.A @ chi, spec.b)] + [(c, d, False) for c, d in zip(spec.C @ chi, spec.d)]:
        if abs(a) < 1e-15:
            continue
        r = b / a
        if eq:
            lo, hi = max(lo, r), min(hi, r)
        elif a > 0:
            hi = min(hi, r)
        else:
            lo = max(lo, r)
    return lo, hi


def recover_primal(duals: DualSolution, spec: ProblemSpec) -> Solution:
    """Primal maximizer from optimal duals (``spec`` without forced zeros)."""
    chi = spec.prior.values * np.exp(-_mult_exponent(duals, spec))
    g_star = float(duals.lam @ spec.b + duals.zeta @ spec.d)
    t = spec.prior.r
    denom = math.log(t) - kl_div(chi / chi.sum(), spec.prior.psi)
    if abs(denom) < 1e-10:
        # G* = 0 is attained along the ray s*chi; unique only if the
        # constraints pin s
        lo, hi = _ray_interval(chi, spec)
        if not (hi - lo <= 1e-9 * max(1.0, hi) and hi > 0):
            raise NonUniqueMaximizer(chi)
        s_star = 0.5 * (lo + hi)
    else:
        s_star = g_star / denom
    if s_star <= 0:
        raise NonUniqueMaximizer(chi, "recovered sum is not positive; maximizer not determined")
    x = s_star * chi
    nu = round_to_counts(x)
    return Solution(
        x_star=x,
        chi_star=chi,
        s_star=s_star,
        g_star=g_star,
        duals=duals,
        nu_star=nu,
        n_star=nu.n,
        removed_zeros=frozenset(),
        spec=spec,
        reduced_spec=spec,
        support=tuple(range(spec.m)),
    )


def kkt_residual(candidate, duals: DualSolution, spec: ProblemSpec, support=None) -> float:
    """Largest violation of the optimality system for ``(x, lam, zeta)``.

    ``support`` restricts the stationarity term to the listed coordinates
    (forced zeros have no finite multiplier form).
    """
    x = np.asarray(candidate, dtype=float)
    terms = [0.0]
    if spec.equalities:
        terms.append(float(np.abs(spec.A @ x - spec.b).max()))
    if spec.inequalities:
        cx = spec.C @ x
        terms.append(float(np.maximum(cx - spec.d, 0.0).max()))
        terms.append(float(np.abs(duals.zeta * (cx - spec.d)).max()))
    idx = np.arange(spec.m) if support is None else np.asarray(support, dtype=int)
    expo = _mult_exponent(duals, spec)
    stat = x - spec.prior.values * x.sum() * np.exp(-expo)
    terms.append(float(np.abs(stat[idx]).max()))
    return max(terms)


def _check_prop29(x, nu: CountVector):
    m = x.size
    v = nu.as_array().astype(float)
    n, s = v.sum(), x.sum()
    ok = abs(n - s) <= m / 2 + 1e-9
    ok &= np.abs(v - x).max() <= 0.5 + 1e-12
    ok &= np.abs(v - x).sum() <= m / 2 + 1e-9
    if n > 0:
        ok &= np.abs(v / n - x / s).sum() <= m / n + 1e-12
    return bool(ok)


def solve(spec: ProblemSpec, start=None, check: bool = True) -> Solution:
    """Forced zeros, dual solve, primal recovery, rounding and self-checks."""
    zeros = forced_zeros(spec)
    red, support, keq, kin = _reduce(spec, zeros)
    canon, eq_src, in_src = _canonical(red)
    duals_c = solve_dual(canon, start if canon is red else None)
    sol_r = recover_primal(duals_c, canon)
    lam_r, zeta_r = _expand_duals(duals_c.lam, duals_c.zeta, eq_src, in_src, len(red.equalities), len(red.inequalities))
    fixed = _nonneg_duals(red, lam_r, zeta_r, in_src)
    if fixed is not None:
        lam_r, zeta_r = fixed
    m = spec.m
    x = np.zeros(m)
    x[list(support)] = sol_r.x_star
    chi = np.zeros(m)
    chi[list(support)] = sol_r.chi_star
    lam = np.zeros(len(spec.equalities))
    lam[keq] = lam_r
    zeta = np.zeros(len(spec.inequalities))
    zeta[kin] = zeta_r
    duals = replace(duals_c, lam=lam, zeta=zeta)
    nu = round_to_counts(x)
    warn = []
    if np.any(zeta < 0):
        warn.append("no nonnegative multiplier representation found for the tight inequalities")
    if np.any(sol_r.x_star <= 0.5):
        warn.append("some x* <= 1/2; the concentration bounds assume x* > 1/2")
    sol = Solution(
        x_star=x,
        chi_star=chi,
        s_star=sol_r.s_star,
        g_star=sol_r.g_star,
        duals=duals,
        nu_star=nu,
        n_star=nu.n,
        removed_zeros=frozenset(zeros),
        spec=spec,
        reduced_spec=red,
        support=support,
        warnings=tuple(warn),
    )
    if check:
        _assert_invariants(sol)
    return sol


def _assert_invariants(sol: Solution):
    spec = sol.spec
    res = kkt_residual(sol.x_star, sol.duals, spec, sol.support)
    scale = max(1.0, float(np.abs(sol.x_star).max()))
    if res > KKT_TOL * scale:
        raise NonConvergence(f"KKT residual {res:.3g} exceeds tolerance")
    xs = sol.x_reduced
    g = g_rel_entropy(xs, sol.reduced_spec.prior.values)
    if abs(g - sol.g_star) > KKT_TOL * (1 + abs(sol.g_star)):
        raise NonConvergence(f"duality gap {abs(g - sol.g_star):.3g} exceeds tolerance")
    if not _check_prop29(sol.x_star, sol.nu_star):
        raise SolverError("rounding violates the optimal count vector inequalities")


# ------------------------------------------------------------ MINIDIV


class _MinidivDual:
    def __init__(self, spec: ProblemSpec):
        self.M = np.vstack([spec.A, spec.C])
        self.w = np.concatenate([spec.b, spec.d])
        self.p = spec.A.shape[0]
        self.q = spec.C.shape[0]
        self.v = spec.prior.values.copy()

    def u(self, z):
        return self.v * np.exp(-(self.M.T @ z))

    def phi(self, z, tau):
        if np.any(z[self.p :] <= 0):
            return math.inf
        with np.errstate(over="ignore"):
            val = self.w @ z + self.u(z).sum() - self.v.sum()
        if not np.isfinite(val):
            return math.inf
        return float(val - tau * np.log(z[self.p :]).sum())

    def derivs(self, z, tau):
        u = self.u(z)
        g = self.w - self.M @ u
        H = (self.M * u) @ self.M.T
        xi = z[self.p :]
        g[self.p :] -= tau / xi
        H[self.p :, self.p :] += np.diag(tau / xi**2)
        return g, H


def _polish_minidiv(obj: _MinidivDual, z):
    p, q = obj.p, obj.q
    u = obj.u(z)
    slack = obj.w[p:] - obj.M[p:] @ u if q else np.zeros(0)
    act = [k for k in range(q) if z[p + k] > 1e-7 or slack[k] < 1e-6 * (1 + abs(obj.w[p + k]))]
    for _attempt in range(q + 2):
        S = list(range(p)) + [p + k for k in act]
        zz = z.copy()
        zz[p:] = 0.0
        zz[S[p:]] = np.maximum(z[S[p:]], 0.0)
        MS, wS = obj.M[S], obj.w[S]
        ok = False
        for _ in range(100):
            uz = obj.u(zz)
            F = wS - MS @ uz
            res = float(np.abs(F).max()) if len(S) else 0.0
            if res < 1e-12 * max(1.0, np.abs(obj.w).max(initial=1.0)):
                ok = True
                break
            J = (MS * uz) @ MS.T
            step = _newton_solve(J, F)
            t = 1.0
            while t > 1e-6:
                zn = zz.copy()
                zn[S] = zz[S] + t * step
                Fn = wS - MS @ obj.u(zn)
                if np.all(np.isfinite(Fn)) and np.abs(Fn).max() < res:
                    break
                t *= 0.5
            zz = zn
        if not ok:
            return None
        neg = [k for k in act if zz[p + k] < -1e-10]
        un = obj.u(zz)
        viol = [k for k in range(q) if k not in act and obj.M[p + k] @ un > obj.w[p + k] + 1e-9 * (1 + abs(obj.w[p + k]))]
        if not neg and not viol:
            zz[p:] = np.maximum(zz[p:], 0.0)
            return zz
        act = sorted((set(act) - set(neg)) | set(viol))
    return None


def solve_minidiv(spec: ProblemSpec) -> MinidivSolution:
    """Minimize the I-divergence ``D(u || v)`` over C(0); ``v`` is the prior."""
    if not feasible(spec):
        raise Infeasible("constraint set is empty")
    zeros = forced_zeros(spec)
    red, support, keq, kin = _reduce(spec, zeros)
    canon, eq_src, in_src = _canonical(red)
    obj = _MinidivDual(canon)
    l = obj.p + obj.q
    if l == 0:
        u = np.zeros(spec.m)
        u[list(support)] = red.prior.values
        return MinidivSolution(u, DualSolution(np.zeros(0), np.zeros(0), 0.0), spec, frozenset(zeros))
    z = np.zeros(l)
    z[obj.p :] = EPS0
    z, gnorm = _barrier(obj, z, _schedule(obj))
    pol = _polish_minidiv(obj, z)
    if pol is not None:
        z = pol
    ur = obj.u(z)
    F = obj.w - obj.M @ ur
    F[obj.p :] = np.where(z[obj.p :] > 0, F[obj.p :], np.minimum(F[obj.p :], 0.0))
    gnorm = float(np.linalg.norm(F))
    if gnorm > KKT_TOL * max(1.0, float(np.abs(obj.w).max(initial=1.0))):
        raise NonConvergence(f"MINIDIV optimality residual {gnorm:.3g}")
    u = np.zeros(spec.m)
    u[list(support)] = ur
    lam_r, zeta_r = _expand_duals(z[: obj.p], z[obj.p :], eq_src, in_src, len(red.equalities), len(red.inequalities))
    fixed = _nonneg_duals(red, lam_r, zeta_r, in_src)
    if fixed is not None:
        lam_r, zeta_r = fixed
    lam = np.zeros(len(spec.equalities))
    lam[keq] = lam_r
    zeta = np.zeros(len(spec.inequalities))
    zeta[kin] = zeta_r
    value = float(-(lam @ spec.b + zeta @ spec.d) - ur.sum() + red.prior.values.sum())
    return MinidivSolution(u, DualSolution(lam, zeta, value, gnorm), spec, frozenset(zeros))


def prior_transfer(solution, spec: ProblemSpec, direction: str) -> ProblemSpec:
    """Prior (and constraint) making one method reproduce the other's solution.

    ``"maxgrent-to-minidiv"``: MINIDIV prior ``(sum x*) y``.
    ``"minidiv-to-maxgrent"``: MAXGRENT prior ``v / sum u*`` plus the
    equality ``sum x = sum u*``.
    """
    if direction == "maxgrent-to-minidiv":
        s = as_fraction(float(solution.x_star.sum()))
        return spec.with_prior(spec.prior.scaled(s))
    if direction == "minidiv-to-maxgrent":
        su = as_fraction(float(solution.u_star.sum()))
        prior = Prior(tuple(q / su for q in spec.prior.exact), "general")
        out = spec.with_prior(prior)
        return out.with_equality({j: 1 for j in range(spec.m)}, su)
    raise ValueError(f"unknown direction {direction!r}")


def g_tilde(solution: Solution, spec: Optional[ProblemSpec] = None) -> float:
    """Sensitivity ``|lam*| . b~ + zeta* . d~``."""
    spec = solution.spec if spec is None else spec
    bt, dt = error_vectors(spec)
    return float(np.abs(solution.duals.lam) @ bt + solution.duals.zeta @ dt)


def perturbed_max_bound(solution: Solution, delta: float, b_tilde=None, d_tilde=None) -> float:
    """Upper bound ``G* + delta G~`` on the maximum of G over C(delta)."""
    if b_tilde is None or d_tilde is None:
        bt, dt = error_vectors(solution.spec)
        b_tilde = bt if b_tilde is None else b_tilde
        d_tilde = dt if d_tilde is None else d_tilde
    gt = float(np.abs(solution.duals.lam) @ np.asarray(b_tilde) + solution.duals.zeta @ np.asarray(d_tilde))
    return solution.g_star + delta * gt
