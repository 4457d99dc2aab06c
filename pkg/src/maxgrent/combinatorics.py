"""Exact counting over count vectors: realizations, probabilities, and the
lattice points of C(delta) split into near (A) and far (B) sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kernels
from ._kernels import EnumerationCapExceeded
from .linprog import Infeasible, SumRange, coordinate_maxima, sum_range
from .model import CountVector, Prior, ProblemSpec, as_fraction, exact_error_vectors

__all__ = [
    "EnumerationCapExceeded",
    "RealizationCount",
    "EnumerationSet",
    "multinomial",
    "realizations",
    "probability",
    "stirling_factor",
    "log_stirling_factor",
    "enumerate_points",
    "enumerate",
    "classify",
    "exact_ratio",
    "argmax_realizations",
    "DEFAULT_CAP",
]

DEFAULT_CAP = 10**7
_FLOAT_EXACT = 2.0**52


def _vec(nu) -> tuple[int, ...]:
    if isinstance(nu, CountVector):
        return nu.entries
    return CountVector(tuple(int(v) for v in nu)).entries


def multinomial(nu) -> int:
    """``n! / (nu_1! ... nu_m!)`` as an exact integer."""
    out, n = 1, 0
    for v in _vec(nu):
        n += v
        out *= math.comb(n, v)
    return out


@dataclass(frozen=True)
class RealizationCount:
    """``#_mu(nu)``: exact integer when available, always its natural log."""

    value: Optional[int]
    log_value: float
    path: str

    def __int__(self):
        if self.value is None:
            raise ValueError("no exact value on the log path")
        return self.value


def _log_int(v: int) -> float:
    if v <= 0:
        return -math.inf
    return math.log(v)


def realizations(nu, mu: Prior) -> RealizationCount:
    """Number of allocations producing ``nu`` under the prior ``mu``.

    Integer priors take the exact path; otherwise log-gamma is used.
    """
    e = _vec(nu)
    if len(e) != mu.m:
        raise ValueError("length mismatch between nu and prior")
    if mu.is_integral:
        val = multinomial(e)
        for v, q in zip(e, mu.exact):
            val *= int(q) ** v
        return RealizationCount(val, _log_int(val), "exact")
    logv = float(_kernels.log_realizations_batch(np.array([e]), np.log(mu.values))[0])
    return RealizationCount(None, logv, "log")


def probability(nu, mu: Prior):
    """``Pr_mu(nu)``.

    Exact ``Fraction`` when the prior is rational (an integer prior is divided
    by ``r**n``; a rational density is used as is), float otherwise.
    """
    e = _vec(nu)
    if len(e) != mu.m:
        raise ValueError("length mismatch between nu and prior")
    total = sum(mu.exact)
    if mu.is_integral:
        n = sum(e)
        return Fraction(int(realizations(e, mu).value), int(total) ** n)
    if total == 1:
        out = Fraction(multinomial(e))
        for v, q in zip(e, mu.exact):
            out *= q**v
        return out
    raise ValueError("prior is neither a density nor integral")


def log_stirling_factor(nu) -> float:
    e = np.asarray(_vec(nu), dtype=float)
    if np.any(e <= 0):
        raise ValueError("Stirling factor needs every entry > 0")
    m, n = e.size, e.sum()
    return 0.5 * math.log(n) - 0.5 * (m - 1) * math.log(2 * math.pi) - 0.5 * float(np.log(e).sum())


def stirling_factor(nu) -> float:
    """``S(nu) = sqrt(n) / ((2 pi)^((m-1)/2) sqrt(nu_1 ... nu_m))``."""
    return math.exp(log_stirling_factor(nu))


# ------------------------------------------------------------ enumeration


def _lcm(a, b):
    return a * b // math.gcd(a, b)


def _rows_of(spec: ProblemSpec, delta: Fraction, rng: SumRange):
    """Exact two-sided rows ``lo <= R nu <= hi`` describing C(delta) and the sum range."""
    m = spec.m
    bt, dt = exact_error_vectors(spec)
    rows = []

    def dense(c):
        r = [Fraction(0)] * m
        for j, a in c.coeffs:
            r[j] = a
        return r

    for c, t in zip(spec.equalities, bt):
        rows.append((dense(c), c.rhs - delta * t, c.rhs + delta * t))
    for c, t in zip(spec.inequalities, dt):
        rows.append((dense(c), None, c.rhs + delta * t))
    rows.append(([Fraction(1)] * m, Fraction(rng.n1), Fraction(rng.n2)))
    return rows


def _integerize(rows):
    """Scale each row to integer coefficients; bounds tighten to integers."""
    R, lo, hi = [], [], []
    for coef, l, h in rows:
        den = reduce(_lcm, (q.denominator for q in coef), 1)
        ic = [int(q * den) for q in coef]
        g = reduce(math.gcd, (abs(v) for v in ic), 0) or 1
        ic = [v // g for v in ic]
        scale = Fraction(den, g)
        R.append(ic)
        lo.append(None if l is None else math.ceil(l * scale))
        hi.append(math.floor(h * scale))
    return R, lo, hi


def enumerate_points(spec: ProblemSpec, delta=0, rng: Optional[SumRange] = None, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Lattice points of C(delta) with sums in ``[n1, n2]`` as an int array.

    Rows are lexicographically ordered.  Membership is decided exactly: each
    rational row is scaled to integers, so no floating tolerance is involved.
    """
    dq = as_fraction(delta)
    if rng is None:
        rng = sum_range(spec)
    rows = _rows_of(spec, dq, rng)
    # per-coordinate bounds by LP over C(delta), capped by n2
    try:
        mx = coordinate_maxima(spec, float(dq)) if rng.n2 > 0 else np.zeros(spec.m)
    except Infeasible:
        return np.zeros((0, spec.m), dtype=np.int64)
    ub = np.minimum(np.floor(np.where(np.isfinite(mx), mx, rng.n2) + 1e-6), rng.n2).astype(np.int64)
    R, lo, hi = _integerize(rows)
    # exact float arithmetic requires every partial sum below 2**52
    bound = max(abs(v) for r in R for v in r) * max(int(ub.max(initial=0)), 1) * spec.m
    big = max([abs(v) for v in lo if v is not None] + [abs(v) for v in hi] + [bound])
    Rf = np.array(R, dtype=float)
    lof = np.array([-np.inf if v is None else float(v) for v in lo])
    hif = np.array([float(v) for v in hi])
    if big < _FLOAT_EXACT:
        return _kernels.enumerate_lattice(Rf, lof, hif, ub, 0.0, cap)
    pts = _kernels.enumerate_lattice(Rf, lof, hif, ub, 1e-9 * big, cap)
    keep = []
    for row in pts:
        ok = True
        for r, l, h in zip(R, lo, hi):
            val = sum(a * int(v) for a, v in zip(r, row))
            if (l is not None and val < l) or val > h:
                ok = False
                break
        keep.append(ok)
    return pts[np.array(keep, dtype=bool)] if len(pts) else pts


def enumerate(spec: ProblemSpec, delta=0, rng: Optional[SumRange] = None, cap: int = DEFAULT_CAP) -> list:
    """Same as :func:`enumerate_points` but as a list of :class:`CountVector`."""
    return [CountVector(tuple(int(v) for v in row)) for row in enumerate_points(spec, delta, rng, cap)]


# ------------------------------------------------------------ classification


@dataclass(frozen=True)
class EnumerationSet:
    mode: str
    parameter: float
    delta: float
    members_A: tuple
    members_B: tuple
    realizations_A: Optional[int]
    realizations_B: Optional[int]
    log_realizations_A: float
    log_realizations_B: float
    path: str

    @property
    def size(self) -> int:
        return len(self.members_A) + len(self.members_B)


def _exact_total(points, mu: Prior) -> int:
    return sum(int(realizations(p, mu).value) for p in points)


def _log_total(points, mu: Prior) -> float:
    if len(points) == 0:
        return -math.inf
    arr = np.array([p.entries for p in points], dtype=np.int64)
    lr = _kernels.log_realizations_batch(arr, np.log(mu.values))
    mx = lr.max()
    return float(mx + math.log(np.exp(lr - mx).sum()))


def classify(universe: Sequence, solution, mode: str, parameter: float, prior: Optional[Prior] = None, delta: float = 0.0) -> EnumerationSet:
    """Split ``universe`` into A (near the optimum) and B (far).

    ``mode="value"``: A holds ``G(nu||mu) >= (1 - eta) G*`` for priors with
    ``G* > 0`` and ``G(nu||mu) >= (1 + eta) G*`` for density priors.
    ``mode="distance"``: A holds ``||nu - x*||_inf <= theta ||x*||_inf``.
    """
    mu = solution.spec.prior if prior is None else prior
    pts = [p if isinstance(p, CountVector) else CountVector(tuple(p)) for p in universe]
    arr = np.array([p.entries for p in pts], dtype=np.int64).reshape(len(pts), mu.m)
    if mode == "value":
        eta = float(parameter)
        if not eta > 0:
            raise ValueError("eta must be > 0")
        density = mu.is_density
        if not density and not eta < 1:
            raise ValueError("eta must lie in (0, 1) for count-like priors")
        g = _kernels.g_rel_batch(arr, np.log(mu.values))
        gs = solution.g_star
        thr = (1 + eta) * gs if density else (1 - eta) * gs
        in_a = g >= thr
    elif mode == "distance":
        theta = float(parameter)
        if not theta > 0:
            raise ValueError("theta must be > 0")
        d = _kernels.linf_dist_batch(arr, solution.x_star)
        in_a = d <= theta * float(np.abs(solution.x_star).max())
    else:
        raise ValueError(f"unknown mode {mode!r}")
    A = tuple(p for p, a in zip(pts, in_a) if a)
    B = tuple(p for p, a in zip(pts, in_a) if not a)
    if mu.is_integral:
        ra, rb = _exact_total(A, mu), _exact_total(B, mu)
        la, lb = _log_int(ra), _log_int(rb)
        path = "exact"
    else:
        ra = rb = None
        la, lb = _log_total(A, mu), _log_total(B, mu)
        path = "log"
    return EnumerationSet(mode, float(parameter), float(delta), A, B, ra, rb, la, lb, path)


def exact_ratio(solution, eset: EnumerationSet, prior: Optional[Prior] = None):
    """``#_mu(nu*) / #_mu(B)``; returns ``(ratio, (num, den))``.

    ``ratio`` is ``inf`` when B is empty.  On the log path the pair is
    ``None`` and the ratio comes from log-gamma.
    """
    mu = solution.spec.prior if prior is None else prior
    rc = realizations(solution.nu_star, mu)
    if not eset.members_B:
        return math.inf, (rc.value, 0)
    if eset.path == "exact" and rc.value is not None:
        num, den = rc.value, eset.realizations_B
        return float(Fraction(num, den)), (num, den)
    return math.exp(rc.log_value - eset.log_realizations_B), None


def log_exact_ratio(solution, eset: EnumerationSet, prior: Optional[Prior] = None) -> float:
    mu = solution.spec.prior if prior is None else prior
    rc = realizations(solution.nu_star, mu)
    if not eset.members_B:
        return math.inf
    if eset.path == "exact" and rc.value is not None:
        return _log_int(rc.value) - _log_int(eset.realizations_B)
    return rc.log_value - eset.log_realizations_B


def argmax_realizations(universe: Iterable, mu: Prior):
    """All vectors attaining the largest ``#_mu`` (ties kept) and that count."""
    best, winners = None, []
    for p in universe:
        v = realizations(p, mu)
        key = v.value if v.value is not None else v.log_value
        if best is None or key > best:
            best, winners = key, [p]
        elif key == best:
            winners.append(p)
    return winners, best
