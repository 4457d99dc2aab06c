"""Linear programs over the constraint polytope.

The kernel is a dense two-phase tableau simplex with Bland's rule.  At an
optimum the basic solution is re-solved in exact rationals when exact data
is supplied, so vertices of rational polytopes come back exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .model import ProblemSpec, as_fraction, error_vectors, exact_error_vectors

__all__ = [
    "LPError",
    "Infeasible",
    "Unbounded",
    "LPResult",
    "simplex",
    "lp_optimize",
    "feasible",
    "SumRange",
    "sum_range",
    "rho_inf",
    "forced_zeros",
    "coordinate_maxima",
]

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-8
ZERO_TOL = 1e-9
MAX_PIVOTS = 50_000


class LPError(RuntimeError):
    pass


class Infeasible(LPError):
    pass


class Unbounded(LPError):
    pass


@dataclass(frozen=True)
class LPResult:
    status: str
    x: Optional[np.ndarray] = None
    fun: Optional[float] = None
    x_exact: Optional[tuple] = None
    fun_exact: Optional[Fraction] = None


def _pivot(T, r, c):
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _iterate(T, basis, ncols):
    """Bland's-rule pivots on tableau ``T`` (last row holds reduced costs)."""
    nrows = T.shape[0] - 1
    for _ in range(MAX_PIVOTS):
        red = T[-1, :ncols]
        cand = np.flatnonzero(red < -PIVOT_TOL)
        if cand.size == 0:
            return "optimal"
        c = int(cand[0])
        col = T[:nrows, c]
        pos = np.flatnonzero(col > PIVOT_TOL)
        if pos.size == 0:
            return "unbounded"
        ratios = T[pos, -1] / col[pos]
        best = ratios.min()
        tied = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = int(min(tied, key=lambda i: basis[i]))
        _pivot(T, r, c)
        basis[r] = c
    raise LPError("simplex pivot limit reached")


def _exact_solve(M, rhs):
    """Gauss-Jordan over Fractions; ``M`` square nonsingular."""
    n = len(M)
    aug = [list(row) + [b] for row, b in zip(M, rhs)]
    for k in range(n):
        p = next(i for i in range(k, n) if aug[i][k] != 0)
        aug[k], aug[p] = aug[p], aug[k]
        piv = aug[k][k]
        aug[k] = [v / piv for v in aug[k]]
        for i in range(n):
            if i != k and aug[i][k] != 0:
                f = aug[i][k]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[k])]
    return [aug[i][n] for i in range(n)]


def simplex(c, A_eq=None, b_eq=None, A_ub=None, b_ub=None, exact=None) -> LPResult:
    """Minimize ``c @ x`` subject to ``A_eq x = b_eq``, ``A_ub x <= b_ub``, ``x >= 0``.

    Parameters
    ----------
    c, A_eq, b_eq, A_ub, b_ub : array_like
        Float problem data; empty blocks may be ``None``.
    exact : tuple, optional
        The same five blocks as nested sequences of ``Fraction``; when given,
        the optimal vertex is recomputed exactly from the final basis.

    Returns
    -------
    LPResult
        ``status`` is ``"optimal"``, ``"infeasible"`` or ``"unbounded"``.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    p, q = A_eq.shape[0], A_ub.shape[0]
    rows = p + q
    nstd = n + q

    A = np.zeros((rows, nstd))
    A[:p, :n] = A_eq
    A[p:, :n] = A_ub
    A[p:, n:] = np.eye(q)
    rhs = np.concatenate([b_eq, b_ub])
    sign = np.where(rhs < 0, -1.0, 1.0)
    A *= sign[:, None]
    rhs = rhs * sign

    basis = [-1] * rows
    art_rows = []
    for i in range(rows):
        if i >= p and sign[i] > 0:
            basis[i] = n + (i - p)
        else:
            art_rows.append(i)
    nart = len(art_rows)
    ncols = nstd + nart
    T = np.zeros((rows + 1, ncols + 1))
    T[:rows, :nstd] = A
    T[:rows, -1] = rhs
    for k, i in enumerate(art_rows):
        T[i, nstd + k] = 1.0
        basis[i] = nstd + k

    # phase 1
    if nart:
        T[-1, nstd:ncols] = 1.0
        for i in art_rows:
            T[-1] -= T[i]
        status = _iterate(T, basis, ncols)
        if status != "optimal" or -T[-1, -1] > FEAS_TOL * max(1.0, np.abs(rhs).max(initial=0.0)):
            return LPResult("infeasible")
        # drive zero-level artificials out, dropping redundant rows
        keep = []
        for i in range(rows):
            if basis[i] >= nstd:
                nz = np.flatnonzero(np.abs(T[i, :nstd]) > PIVOT_TOL)
                if nz.size:
                    _pivot(T, i, int(nz[0]))
                    basis[i] = int(nz[0])
                    keep.append(i)
            else:
                keep.append(i)
        T = np.vstack([T[keep][:, list(range(nstd)) + [ncols]], np.zeros((1, nstd + 1))])
        basis = [basis[i] for i in keep]
        kept_rows = keep
    else:
        T = np.hstack([T[:, :nstd], T[:, -1:]])
        kept_rows = list(range(rows))

    # phase 2
    T[-1, :] = 0.0
    T[-1, :n] = c
    for i, bcol in enumerate(basis):
        if T[-1, bcol] != 0.0:
            T[-1] -= T[-1, bcol] * T[i]
    status = _iterate(T, basis, nstd)
    if status == "unbounded":
        return LPResult("unbounded")

    xs = np.zeros(nstd)
    for i, bcol in enumerate(basis):
        xs[bcol] = T[i, -1]
    x = np.maximum(xs[:n], 0.0)
    fun = float(c @ x)
    if exact is None:
        return LPResult("optimal", x, fun)

    ce, Ae, be, Au, bu = exact
    Ae = [list(r) for r in (Ae or [])]
    Au = [list(r) for r in (Au or [])]
    std_rows = []
    for i in range(p):
        std_rows.append(Ae[i] + [Fraction(0)] * q)
    for k in range(q):
        std_rows.append(Au[k] + [Fraction(int(j == k)) for j in range(q)])
    std_rhs = list(be or []) + list(bu or [])
    M = [[std_rows[i][bcol] for bcol in basis] for i in kept_rows]
    vals = _exact_solve(M, [std_rhs[i] for i in kept_rows])
    xe = [Fraction(0)] * nstd
    for bcol, v in zip(basis, vals):
        xe[bcol] = v
    xe = tuple(xe[:n])
    fe = sum((ci * xi for ci, xi in zip(ce, xe)), Fraction(0))
    return LPResult("optimal", np.array([float(v) for v in xe]), float(fe), xe, fe)


# ------------------------------------------------------------ spec-level


def _blocks(spec: ProblemSpec, delta=0):
    """Float and exact (A_eq, b_eq, A_ub, b_ub) of C(delta)."""
    m = spec.m
    dq = as_fraction(delta)
    bt, dt = exact_error_vectors(spec)

    def row(c):
        r = [Fraction(0)] * m
        for j, a in c.coeffs:
            r[j] = a
        return r

    Ae, be, Au, bu = [], [], [], []
    for c, t in zip(spec.equalities, bt):
        if dq == 0:
            Ae.append(row(c))
            be.append(c.rhs)
        else:
            Au.append(row(c))
            bu.append(c.rhs + dq * t)
            Au.append([-a for a in row(c)])
            bu.append(-(c.rhs - dq * t))
    for c, t in zip(spec.inequalities, dt):
        Au.append(row(c))
        bu.append(c.rhs + dq * t)

    def f(rows):
        return np.array([[float(v) for v in r] for r in rows]).reshape(len(rows), m)

    floats = (f(Ae), np.array([float(v) for v in be]), f(Au), np.array([float(v) for v in bu]))
    return floats, (Ae, be, Au, bu)


def lp_optimize(objective, spec: ProblemSpec, direction: str = "max", delta=0):
    """Optimize a linear objective over C(delta).

    Returns
    -------
    (value, point) : (float, ndarray)

    Raises
    ------
    Infeasible, Unbounded
    """
    if direction not in ("min", "max"):
        raise ValueError("direction must be 'min' or 'max'")
    obj = [as_fraction(v) for v in objective]
    sgn = -1 if direction == "max" else 1
    ce = [sgn * v for v in obj]
    (Ae, be, Au, bu), ex = _blocks(spec, delta)
    res = simplex(np.array([float(v) for v in ce]), Ae, be, Au, bu, exact=(ce,) + ex)
    if res.status == "infeasible":
        raise Infeasible("constraint set is empty")
    if res.status == "unbounded":
        raise Unbounded(f"objective unbounded in direction {direction}")
    return sgn * res.fun, res.x


def lp_optimize_exact(objective, spec: ProblemSpec, direction: str = "max", delta=0):
    obj = [as_fraction(v) for v in objective]
    sgn = -1 if direction == "max" else 1
    ce = [sgn * v for v in obj]
    (Ae, be, Au, bu), ex = _blocks(spec, delta)
    res = simplex(np.array([float(v) for v in ce]), Ae, be, Au, bu, exact=(ce,) + ex)
    if res.status == "infeasible":
        raise Infeasible("constraint set is empty")
    if res.status == "unbounded":
        raise Unbounded(f"objective unbounded in direction {direction}")
    return sgn * res.fun_exact, res.x_exact


def feasible(spec: ProblemSpec, delta=0) -> bool:
    try:
        lp_optimize([0] * spec.m, spec, "min", delta)
    except Infeasible:
        return False
    return True


@dataclass(frozen=True)
class SumRange:
    """Extremes ``s1 <= sum x <= s2`` over C(0) and the integer range ``[n1, n2]``."""

    s1: float
    s2: float
    n1: int
    n2: int
    s1_exact: Optional[Fraction] = None
    s2_exact: Optional[Fraction] = None

    @classmethod
    def from_sums(cls, s1, s2, m: int) -> "SumRange":
        s1q = s1 if isinstance(s1, Fraction) else None
        s2q = s2 if isinstance(s2, Fraction) else None
        half = math.ceil(m / 2)
        n1 = max(0, math.ceil(s1) - half)
        n2 = math.ceil(s2) + half
        return cls(float(s1), float(s2), n1, n2, s1q, s2q)


def sum_range(spec: ProblemSpec) -> SumRange:
    """LP extremes of the sum; raises :class:`Unbounded` when ``s2`` is infinite."""
    ones = [1] * spec.m
    s1, _ = lp_optimize_exact(ones, spec, "min")
    try:
        s2, _ = lp_optimize_exact(ones, spec, "max")
    except Unbounded as exc:
        raise Unbounded("sum of x is unbounded over the constraints; G(x||y) is unbounded") from exc
    return SumRange.from_sums(s1, s2, spec.m)


def rho_inf(spec: ProblemSpec, norm: str = "row-l1") -> float:
    """Radius keeping rounded vectors inside C(delta).

    ``norm="row-l1"`` uses the induced infinity norm (maximum row l1 norm).
    ``norm="max-abs"`` uses the largest absolute entry instead.
    """
    if norm not in ("row-l1", "max-abs"):
        raise ValueError(f"unknown norm {norm!r}")
    bt, dt = error_vectors(spec)
    terms = []
    for M, t in ((spec.A, bt), (spec.C, dt)):
        if M.shape[0] == 0:
            continue
        nrm = np.abs(M).sum(axis=1).max() if norm == "row-l1" else np.abs(M).max()
        terms.append(t.min() / nrm)
    return float(min(terms)) if terms else math.inf


def coordinate_maxima(spec: ProblemSpec, delta=0) -> np.ndarray:
    """``max x_j`` over C(delta) per coordinate (``inf`` if unbounded)."""
    out = np.empty(spec.m)
    for j in range(spec.m):
        e = [0] * spec.m
        e[j] = 1
        try:
            out[j], _ = lp_optimize(e, spec, "max", delta)
        except Unbounded:
            out[j] = math.inf
    return out


def forced_zeros(spec: ProblemSpec) -> frozenset:
    """Indices ``j`` with ``max x_j = 0`` over C(0)."""
    if not feasible(spec):
        raise Infeasible("constraint set is empty")
    mx = coordinate_maxima(spec)
    return frozenset(int(j) for j in np.flatnonzero(mx <= ZERO_TOL))
