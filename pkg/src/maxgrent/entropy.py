"""Entropy functionals on nonnegative vectors.

All values are in nats and use ``0 ln 0 = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

__all__ = [
    "g_entropy",
    "g_rel_entropy",
    "i_div",
    "kl_div",
    "basic_bounds",
    "hypercube_bounds",
    "DensityDecomposition",
    "density_decomposition",
]


def _nonneg(x, name="x") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"{name} must be a vector")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has a negative or non-finite entry")
    return x


def _positive(y, name="y") -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError(f"{name} must be a vector")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError(f"{name} has a nonpositive entry")
    return y


def _same_len(x, y):
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")


def g_entropy(x) -> float:
    """Generalized entropy ``G(x) = -sum x ln x + s ln s``, ``s = sum x``.

    Examples
    --------
    >>> round(g_entropy([2, 2]), 6)
    2.772589
    """
    x = _nonneg(x)
    s = x.sum()
    return float(-xlogy(x, x).sum() + xlogy(s, s))


def g_rel_entropy(x, y) -> float:
    """Generalized relative entropy ``G(x || y)``.

    Parameters
    ----------
    x : array_like
        Nonnegative vector.
    y : array_like
        Positive vector of the same length (the prior).

    Returns
    -------
    float
        ``-sum x_i ln(x_i / y_i) + s ln s``.
    """
    x = _nonneg(x)
    y = _positive(y)
    _same_len(x, y)
    s = x.sum()
    return float(-xlogy(x, x).sum() + (x * np.log(y)).sum() + xlogy(s, s))


def i_div(u, v) -> float:
    """I-divergence ``sum u ln(u/v) - sum u + sum v``."""
    u = _nonneg(u, "u")
    v = _positive(v, "v")
    _same_len(u, v)
    return float((xlogy(u, u) - u * np.log(v)).sum() - u.sum() + v.sum())


def kl_div(p, q) -> float:
    """``D(p || q) = sum p ln(p/q)`` for densities (no normalization done)."""
    p = _nonneg(p, "p")
    q = _positive(q, "q")
    _same_len(p, q)
    return float((xlogy(p, p) - p * np.log(q)).sum())


def basic_bounds(x, y) -> tuple[float, float]:
    """``(s ln min y, s ln sum y)``, which bracket ``G(x || y)``."""
    x = _nonneg(x)
    y = _positive(y)
    _same_len(x, y)
    s = float(x.sum())
    return s * float(np.log(y.min())), s * float(np.log(y.sum()))


def _h(x, zeta):
    m = x.size
    return float(np.sum(1.0 / (x - zeta)) - m / (x.sum() / m - zeta))


def hypercube_bounds(x, zeta: float, mu) -> tuple[float, float]:
    """Gaps bracketing ``G(y||mu) - G(x||mu)`` over ``||y - x||_inf <= zeta``.

    Returns ``(lower_gap, upper_gap)`` with ``g = sum ln(mu_i / chi_i)`` and
    ``h(x, z) = sum 1/(x_i - z) - m/(s/m - z)``.  Requires ``x > zeta``.
    The derivation assumes ``G(.||mu)`` is coordinatewise nondecreasing on
    the cube, which holds for ``mu >= 1``.
    """
    x = _positive(x)
    mu = _positive(mu, "mu")
    _same_len(x, mu)
    if zeta < 0:
        raise ValueError("zeta must be >= 0")
    if np.any(x <= zeta):
        raise ValueError("lower gap needs x > zeta elementwise")
    chi = x / x.sum()
    g = float(np.sum(np.log(mu / chi)))
    lower = -g * zeta - 0.5 * _h(x, zeta) * zeta**2
    upper = g * zeta - 0.5 * _h(x, -zeta) * zeta**2
    return lower, upper


@dataclass(frozen=True)
class DensityDecomposition:
    """``x = s chi``, ``y = t psi`` and ``div = D(chi || psi)``."""

    s: float
    t: float
    div: float
    chi: np.ndarray
    psi: np.ndarray

    @property
    def g(self) -> float:
        return self.s * np.log(self.t) - self.s * self.div

    @property
    def l1(self) -> float:
        return float(np.abs(self.chi - self.psi).sum())

    def pinsker_bounds(self) -> tuple[float, float]:
        """Reverse-Pinsker lower and Pinsker upper bound on ``G(x || y)``."""
        base = self.s * np.log(self.t)
        d2 = self.l1**2
        return base - self.s / self.psi.min() * d2, base - 0.5 * self.s * d2


def density_decomposition(x, y) -> DensityDecomposition:
    x = _positive(x)
    y = _positive(y)
    _same_len(x, y)
    s, t = float(x.sum()), float(y.sum())
    chi, psi = x / s, y / t
    return DensityDecomposition(s, t, kl_div(chi, psi), chi, psi)
