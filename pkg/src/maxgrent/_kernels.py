"""Hot loops: lattice enumeration and batch evaluation over count vectors.

Each kernel has a numba ``@njit`` implementation and a pure-numpy twin.
Setting ``MAXGRENT_NO_NUMBA=1`` (or lacking numba) selects the numpy twins.
Both produce identical output; ``tests/test_kernels.py`` checks that.
"""

from __future__ import annotations

import math
import os

import numpy as np
from scipy.special import gammaln

__all__ = [
    "BACKEND",
    "EnumerationCapExceeded",
    "log_realizations_batch",
    "g_rel_batch",
    "linf_dist_batch",
    "enumerate_lattice",
]


class EnumerationCapExceeded(RuntimeError):
    """More lattice points than the enumeration cap allows."""


def _want_numba() -> bool:
    if os.environ.get("MAXGRENT_NO_NUMBA", "").strip() not in ("", "0"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


# ------------------------------------------------------------------ numpy


def _np_log_realizations(nus, log_mu):
    nus = np.asarray(nus, dtype=np.float64)
    n = nus.sum(axis=1)
    return gammaln(n + 1.0) - gammaln(nus + 1.0).sum(axis=1) + nus @ log_mu


def _np_g_rel(xs, log_y):
    xs = np.asarray(xs, dtype=np.float64)
    s = xs.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        xlx = np.where(xs > 0, xs * np.log(np.where(xs > 0, xs, 1.0)), 0.0)
        sls = np.where(s > 0, s * np.log(np.where(s > 0, s, 1.0)), 0.0)
    return -xlx.sum(axis=1) + xs @ log_y + sls


def _np_linf(xs, x):
    return np.abs(np.asarray(xs, dtype=np.float64) - x).max(axis=1)


def _suffix_bounds(R, ub):
    """Min/max of ``R[:, i:] @ v`` over the box ``0 <= v <= ub``, per start i."""
    k, m = R.shape
    contrib = R * ub[None, :]
    lo = np.minimum(contrib, 0.0)
    hi = np.maximum(contrib, 0.0)
    sufmin = np.zeros((k, m + 1))
    sufmax = np.zeros((k, m + 1))
    sufmin[:, :m] = np.cumsum(lo[:, ::-1], axis=1)[:, ::-1]
    sufmax[:, :m] = np.cumsum(hi[:, ::-1], axis=1)[:, ::-1]
    return sufmin, sufmax


def _np_enumerate(R, lo, hi, ub, slack, cap):
    k, m = R.shape
    sufmin, sufmax = _suffix_bounds(R, ub)
    prefixes = np.zeros((1, 0), dtype=np.int64)
    partial = np.zeros((1, k))
    for j in range(m):
        col = R[:, j]
        vlo = np.zeros(len(prefixes))
        vhi = np.full(len(prefixes), float(ub[j]))
        for r in range(k):
            a = col[r]
            if a == 0.0:
                ok = (partial[:, r] + sufmax[r, j + 1] >= lo[r] - slack) & (
                    partial[:, r] + sufmin[r, j + 1] <= hi[r] + slack
                )
                vhi = np.where(ok, vhi, -1.0)
                continue
            with np.errstate(invalid="ignore"):
                t_lo = (lo[r] - slack - partial[:, r] - sufmax[r, j + 1]) / a
                t_hi = (hi[r] + slack - partial[:, r] - sufmin[r, j + 1]) / a
            if a > 0:
                vlo = np.maximum(vlo, t_lo)
                vhi = np.minimum(vhi, t_hi)
            else:
                vlo = np.maximum(vlo, t_hi)
                vhi = np.minimum(vhi, t_lo)
        vlo = np.ceil(np.nan_to_num(vlo, nan=0.0, neginf=0.0))
        vhi = np.floor(np.nan_to_num(vhi, nan=-1.0, posinf=float(ub[j])))
        counts = np.maximum(vhi - vlo + 1.0, 0.0).astype(np.int64)
        total = int(counts.sum())
        if total > cap:
            raise EnumerationCapExceeded(f"more than {cap} lattice points")
        parent = np.repeat(np.arange(len(prefixes)), counts)
        starts = np.cumsum(counts) - counts
        offs = np.arange(total) - np.repeat(starts, counts)
        vals = (np.repeat(vlo, counts) + offs).astype(np.int64)
        prefixes = np.hstack([prefixes[parent], vals[:, None]])
        partial = partial[parent] + vals[:, None] * col[None, :]
    return prefixes


# ------------------------------------------------------------------ numba

if _want_numba():
    from numba import njit

    @njit(cache=True)
    def _nb_log_realizations(nus, log_mu):
        N, m = nus.shape
        out = np.empty(N)
        for i in range(N):
            n = 0.0
            acc = 0.0
            for j in range(m):
                v = float(nus[i, j])
                n += v
                acc += v * log_mu[j] - math.lgamma(v + 1.0)
            out[i] = acc + math.lgamma(n + 1.0)
        return out

    @njit(cache=True)
    def _nb_g_rel(xs, log_y):
        N, m = xs.shape
        out = np.empty(N)
        for i in range(N):
            s = 0.0
            acc = 0.0
            for j in range(m):
                v = xs[i, j]
                s += v
                if v > 0.0:
                    acc += v * (log_y[j] - math.log(v))
            if s > 0.0:
                acc += s * math.log(s)
            out[i] = acc
        return out

    @njit(cache=True)
    def _nb_linf(xs, x):
        N, m = xs.shape
        out = np.empty(N)
        for i in range(N):
            best = 0.0
            for j in range(m):
                d = abs(xs[i, j] - x[j])
                if d > best:
                    best = d
            out[i] = best
        return out

    @njit(cache=True)
    def _nb_range(R, lo, hi, ub, slack, sufmin, sufmax, p, j):
        k = R.shape[0]
        vlo = 0.0
        vhi = float(ub[j])
        for r in range(k):
            a = R[r, j]
            if a == 0.0:
                if p[r] + sufmax[r, j + 1] < lo[r] - slack or p[r] + sufmin[r, j + 1] > hi[r] + slack:
                    return 0, -1
                continue
            t_lo = (lo[r] - slack - p[r] - sufmax[r, j + 1]) / a
            t_hi = (hi[r] + slack - p[r] - sufmin[r, j + 1]) / a
            if a > 0.0:
                if t_lo > vlo:
                    vlo = t_lo
                if t_hi < vhi:
                    vhi = t_hi
            else:
                if t_hi > vlo:
                    vlo = t_hi
                if t_lo < vhi:
                    vhi = t_lo
        if vhi < vlo:
            return 0, -1
        return int(math.ceil(vlo)), int(math.floor(vhi))

    @njit(cache=True)
    def _nb_enumerate_impl(R, lo, hi, ub, slack, cap, sufmin, sufmax):
        k, m = R.shape
        buf = np.empty((1024, m), dtype=np.int64)
        count = 0
        cur = np.zeros(m, dtype=np.int64)
        top = np.zeros(m, dtype=np.int64)
        p = np.zeros((m + 1, k))
        a, b = _nb_range(R, lo, hi, ub, slack, sufmin, sufmax, p[0], 0)
        cur[0] = a
        top[0] = b
        j = 0
        while j >= 0:
            if cur[j] > top[j]:
                j -= 1
                if j >= 0:
                    cur[j] += 1
                continue
            v = float(cur[j])
            for r in range(k):
                p[j + 1, r] = p[j, r] + R[r, j] * v
            if j == m - 1:
                if count == cap:
                    return buf[:count], True
                if count == buf.shape[0]:
                    grown = np.empty((2 * count, m), dtype=np.int64)
                    grown[:count] = buf
                    buf = grown
                buf[count] = cur
                count += 1
                cur[j] += 1
                continue
            j += 1
            a, b = _nb_range(R, lo, hi, ub, slack, sufmin, sufmax, p[j], j)
            cur[j] = a
            top[j] = b
        return buf[:count].copy(), False

    def _nb_enumerate(R, lo, hi, ub, slack, cap):
        sufmin, sufmax = _suffix_bounds(R, ub)
        pts, over = _nb_enumerate_impl(R, lo, hi, ub.astype(np.int64), float(slack), int(cap), sufmin, sufmax)
        if over:
            raise EnumerationCapExceeded(f"more than {cap} lattice points")
        return pts

    BACKEND = "numba"
    _log_real, _g_rel, _linf, _enum = _nb_log_realizations, _nb_g_rel, _nb_linf, _nb_enumerate
else:
    BACKEND = "numpy"
    _log_real, _g_rel, _linf, _enum = _np_log_realizations, _np_g_rel, _np_linf, _np_enumerate


# ------------------------------------------------------------------ public


def log_realizations_batch(nus, log_mu) -> np.ndarray:
    """``ln #_mu(nu)`` for each row of ``nus`` via log-gamma."""
    nus = np.ascontiguousarray(nus, dtype=np.int64)
    if nus.ndim != 2:
        raise ValueError("nus must be 2-D")
    return _log_real(nus, np.ascontiguousarray(log_mu, dtype=np.float64))


def g_rel_batch(xs, log_y) -> np.ndarray:
    """Row-wise ``G(x || y)`` given ``log y``."""
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    if xs.ndim != 2:
        raise ValueError("xs must be 2-D")
    return _g_rel(xs, np.ascontiguousarray(log_y, dtype=np.float64))


def linf_dist_batch(xs, x) -> np.ndarray:
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    return _linf(xs, np.ascontiguousarray(x, dtype=np.float64))


def enumerate_lattice(R, lo, hi, ub, slack: float = 0.0, cap: int = 10**7) -> np.ndarray:
    """All ``v in N^m`` with ``v <= ub`` and ``lo - slack <= R v <= hi + slack``.

    Rows come out in lexicographic order.  With integer-valued ``R, lo, hi``
    (below 2**52 in magnitude) and ``slack = 0`` the arithmetic is exact.
    ``lo``/``hi`` may hold ``-inf``/``+inf``.
    """
    R = np.ascontiguousarray(R, dtype=np.float64)
    lo = np.ascontiguousarray(lo, dtype=np.float64)
    hi = np.ascontiguousarray(hi, dtype=np.float64)
    ub = np.ascontiguousarray(ub, dtype=np.int64)
    if R.ndim != 2 or R.shape[1] != ub.shape[0]:
        raise ValueError("shape mismatch between R and ub")
    if np.any(ub < 0):
        return np.zeros((0, R.shape[1]), dtype=np.int64)
    return _enum(R, lo, hi, ub.astype(np.float64), float(slack), int(cap))


def numpy_twins():
    """The numpy implementations, regardless of the selected backend."""
    return {
        "log_realizations": _np_log_realizations,
        "g_rel": _np_g_rel,
        "linf": _np_linf,
        "enumerate": _np_enumerate,
    }
