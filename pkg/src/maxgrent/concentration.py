"""Concentration constants, ratio lower bounds and scaling thresholds.

Everything is computed in the log domain (natural logs).  The bounds act on
the problem with forced zeros removed, so ``m`` below is the number of
coordinates that can be positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .linprog import SumRange, rho_inf
from .model import Prior
from .solver import Solution, g_tilde as _g_tilde

__all__ = [
    "PreconditionError",
    "NoConcentration",
    "Preconditions",
    "CConstants",
    "ScalingConstants",
    "ConcentrationReport",
    "c_constants",
    "value_ratio_bound",
    "k_factor",
    "theta_max",
    "growth_gap",
    "distance_ratio_bound",
    "scaling_constants",
    "c3_root",
    "c3_bracket",
    "threshold",
    "prob_ratio_bound",
    "b3_gap",
]

K_FORM = "1 / (2 (1+theta) (1 - (1+theta) |x*|_inf / |x*|_1))"


class PreconditionError(ValueError):
    """A parameter or input violates a hard precondition."""


class NoConcentration(PreconditionError):
    """``alpha <= 0``: the bound does not grow with the scaling factor."""


@dataclass
class Preconditions:
    """Named boolean checks, each with a message explaining it."""

    flags: dict = field(default_factory=dict)

    def add(self, name: str, ok: bool, message: str):
        self.flags[name] = (bool(ok), message)

    @property
    def ok(self) -> bool:
        return all(v for v, _ in self.flags.values())

    def failed(self) -> list:
        return [f"{k}: {msg}" for k, (v, msg) in self.flags.items() if not v]

    def as_dict(self) -> dict:
        return {k: {"ok": v, "message": msg} for k, (v, msg) in self.flags.items()}


@dataclass(frozen=True)
class CConstants:
    log_C0: float
    log_C1: float
    log_C2: float
    log_C3: float
    log_C4: float


@dataclass(frozen=True)
class ScalingConstants:
    log_K: float
    alpha: float
    beta: float
    gamma: float


@dataclass
class ConcentrationReport:
    mode: str
    prior_kind: str
    log_C0: float
    log_C1: float
    log_C2: float
    log_C3: float
    log_C4: float
    g_tilde: float
    k_factor: float
    alpha: float
    beta: float
    log_gamma_inputs: tuple
    c1: float
    c2: Optional[float]
    c3: float
    c_hat: float
    log_ratio_bound: float
    preconditions_ok: Preconditions
    log_K: float = float("nan")
    gamma: float = float("nan")
    rho_inf: float = float("nan")
    k_form: str = K_FORM
    eta_condition: str = "printed"

    @property
    def log10_ratio_bound(self) -> float:
        return self.log_ratio_bound / math.log(10)

    def as_dict(self) -> dict:
        def num(v):
            if v is None:
                return None
            v = float(v)
            return v if math.isfinite(v) else str(v)

        return {
            "mode": self.mode,
            "prior_kind": self.prior_kind,
            "log_C0": num(self.log_C0),
            "log_C1": num(self.log_C1),
            "log_C2": num(self.log_C2),
            "log_C3": num(self.log_C3),
            "log_C4": num(self.log_C4),
            "g_tilde": num(self.g_tilde),
            "k_factor": num(self.k_factor),
            "log_K": num(self.log_K),
            "alpha": num(self.alpha),
            "beta": num(self.beta),
            "gamma": num(self.gamma),
            "log_gamma_inputs": [num(v) for v in self.log_gamma_inputs],
            "rho_inf": num(self.rho_inf),
            "c1": num(self.c1),
            "c2": num(self.c2),
            "c3": num(self.c3),
            "c_hat": num(self.c_hat),
            "log_ratio_bound": num(self.log_ratio_bound),
            "log10_ratio_bound": num(self.log10_ratio_bound),
            "k_form": self.k_form,
            "eta_condition": self.eta_condition,
            "preconditions": self.preconditions_ok.as_dict(),
        }


# ------------------------------------------------------------ helpers


def _reduced(solution: Solution, mu: Optional[Prior]):
    """``(x, mu_values, is_density)`` on the support of ``x*``."""
    sup = list(solution.support)
    x = solution.x_star[sup]
    if mu is None:
        prior = solution.reduced_spec.prior
        vals = prior.values
        dens = solution.spec.prior.is_density
    else:
        vals = mu.values if mu.m == len(sup) else mu.values[sup]
        dens = mu.is_density
    return np.asarray(x, dtype=float), np.asarray(vals, dtype=float), bool(dens)


def _log_diff_exp(la: float, lb: float) -> float:
    """``ln(e^la - e^lb)`` for ``la >= lb``."""
    if lb > la:
        raise ValueError("log-diff-exp needs la >= lb")
    if lb == la:
        return -math.inf
    return la + math.log1p(-math.exp(lb - la))


def _log_c3(s1: float, s2: float, m: int) -> float:
    if s1 - m / 2 < 0:
        raise PreconditionError(f"s1 = {s1:g} < m/2 = {m / 2:g}; C3 is undefined")
    a = math.sqrt(s2 + m / 2 + 2) + math.sqrt(m)
    b = math.sqrt(s1 - m / 2) + math.sqrt(m)
    return _log_diff_exp((m + 1) * math.log(a), (m + 1) * math.log(b))


def _log_c2(x: np.ndarray) -> float:
    s = x.sum()
    chi = x / s
    return 0.5 * (math.log(s) + float(np.sum(np.log(chi) - np.log(x + 0.5))))


def _c4_sum(x: np.ndarray, variant: str = "lemma") -> float:
    """Bracket inside ``C4 = exp(-sum/8)``."""
    m = x.size
    s = x.sum()
    base = float(np.sum(1.0 / (x - 0.5)))
    if variant == "lemma":
        return base - m / (s / m - 0.5)
    if variant == "floor":
        return base - m * m / s
    raise ValueError(variant)


def _log_lead(m: int) -> float:
    """``ln[(m+1) Gamma(m/2) e^(-m/12) / (2 pi^(m/2))]``."""
    return math.log(m + 1) + math.lgamma(m / 2) - m / 12 - math.log(2) - (m / 2) * math.log(math.pi)


def _check_half(x: np.ndarray):
    if np.any(x <= 0.5):
        raise PreconditionError("x* > 1/2 is required (some entry is <= 1/2)")


def _log_block(x, mu, s1, s2, density: bool, c4_variant: str = "lemma") -> float:
    m = x.size
    _check_half(x)
    prior_term = 0.5 * float(np.log(mu).sum())
    prior_term = prior_term if density else -prior_term
    return _log_lead(m) + prior_term + _log_c2(x) - _c4_sum(x, c4_variant) / 8 - _log_c3(s1, s2, m)


def _rho(solution: Solution, rho_norm: str) -> float:
    return rho_inf(solution.reduced_spec, rho_norm)


# ------------------------------------------------------------ constants


def c_constants(solution: Solution, rng: SumRange, mu: Optional[Prior] = None) -> CConstants:
    """``(ln C0, ..., ln C4)`` for the solved instance."""
    x, mu_v, dens = _reduced(solution, mu)
    _check_half(x)
    m = x.size
    lc2 = _log_c2(x)
    lc3 = _log_c3(rng.s1, rng.s2, m)
    lc4 = -_c4_sum(x) / 8
    lc1 = 0.5 * math.log(math.pi) - math.log(m + 1) - (m - 3) / 2 * math.log(2) - math.lgamma(m / 2) + lc3
    prior_term = 0.5 * float(np.log(mu_v).sum())
    lc0 = -m / 12 - (m - 1) / 2 * math.log(2 * math.pi) + (prior_term if dens else -prior_term) + lc2 + lc4
    return CConstants(lc0, lc1, lc2, lc3, lc4)


def _eta_floor(x, mu, g_star, density: bool) -> float:
    chi = x / x.sum()
    if density:
        P = float(np.sum(np.log(1.0 / (mu * chi))))
    else:
        P = float(np.sum(np.log(mu / chi)))
    return (0.5 * P + _c4_sum(x) / 8) / abs(g_star)


def value_ratio_bound(solution: Solution, rng: SumRange, mu: Optional[Prior] = None, eta: float = 0.05, delta: float = 0.0, rho_norm: str = "row-l1"):
    """Log lower bound on ``#nu* / #B`` over the value-far set.

    Returns
    -------
    (log_bound, Preconditions)
    """
    x, mu_v, dens = _reduced(solution, mu)
    if not eta > 0 or (not dens and not eta < 1):
        raise PreconditionError("eta must lie in (0, 1)")
    flags = Preconditions()
    block = _log_block(x, mu_v, rng.s1, rng.s2, dens)
    g = solution.g_star
    expo = -eta * g if dens else eta * g
    rho = _rho(solution, rho_norm)
    flags.add("x_star_gt_half", True, "x* > 1/2")
    flags.add("delta_ge_half_inv_rho", delta >= 1 / (2 * rho), f"delta >= 1/(2 rho_inf) = {1 / (2 * rho):.4g}")
    floor = _eta_floor(x, mu_v, g, dens)
    flags.add("eta_floor", eta >= floor, f"eta >= {floor:.4g} puts nu* in A")
    return block + expo, flags


def theta_max(x_star) -> float:
    x = np.asarray(x_star, dtype=float)
    return 0.5 * x.sum() / np.abs(x).max() - 1.0


def k_factor(theta: float, x_star) -> float:
    """``K(theta, x*) = 1 / (2 (1+theta) (1 - (1+theta) |x*|_inf / |x*|_1))``."""
    x = np.asarray(x_star, dtype=float)
    tmax = theta_max(x)
    if not (theta > 0 and theta <= tmax + 1e-12):
        raise PreconditionError(f"theta must lie in (0, {tmax:.6g}]")
    r = np.abs(x).max() / np.abs(x).sum()
    return 1.0 / (2 * (1 + theta) * (1 - (1 + theta) * r))


def growth_gap(theta: float, x_star) -> float:
    """Lower bound on ``G* - G(x)`` outside the theta-cube around ``x*``."""
    x = np.asarray(x_star, dtype=float)
    return theta**2 * k_factor(theta, x) * float(np.abs(x).max())


def b3_gap(x, x_star, a: float) -> float:
    """Hessian quadratic form ``f(x; a)`` along the segment from ``x*`` to ``x``.

    ``sum (x_i - x*_i)^2 / (x*_i + a (x_i - x*_i)) - (s - s*)^2 / (s* + a (s - s*))``;
    nonnegative for ``x >= 0`` and ``a`` in (0, 1), zero iff ``x`` is proportional to ``x*``.
    """
    x = np.asarray(x, dtype=float)
    xs = np.asarray(x_star, dtype=float)
    d = x - xs
    ds = d.sum()
    return float(np.sum(d * d / (xs + a * d)) - ds * ds / (xs.sum() + a * ds))


def distance_ratio_bound(solution: Solution, rng: SumRange, mu: Optional[Prior] = None, theta: float = 0.1, delta: float = 0.0, g_tilde: Optional[float] = None, rho_norm: str = "row-l1"):
    """Log lower bound on ``#nu* / #B`` over the distance-far set."""
    x, mu_v, dens = _reduced(solution, mu)
    K = k_factor(theta, x)
    gt = _g_tilde(solution) if g_tilde is None else g_tilde
    xinf = float(np.abs(x).max())
    block = _log_block(x, mu_v, rng.s1, rng.s2, dens)
    expo = theta**2 * K * xinf - delta * gt
    rho = _rho(solution, rho_norm)
    flags = Preconditions()
    flags.add("x_star_gt_half", True, "x* > 1/2")
    flags.add("linf_lt_2l1", xinf < 2 * x.sum(), "|x*|_inf < 2 |x*|_1")
    flags.add("delta_ge_half_inv_rho", delta >= 1 / (2 * rho), f"delta >= 1/(2 rho_inf) = {1 / (2 * rho):.4g}")
    flags.add("theta_ge_half_inv_xinf", theta >= 1 / (2 * xinf), f"theta >= 1/(2 |x*|_inf) = {1 / (2 * xinf):.4g}")
    lim = theta**2 * K * xinf / gt
    flags.add("usefulness", delta < lim, f"delta < theta^2 K |x*|_inf / G~ = {lim:.4g}")
    return block + expo, flags


# ------------------------------------------------------------ scaling


def scaling_constants(solution: Solution, rng: SumRange, mu: Optional[Prior] = None, mode: str = "value", params: dict = None, epsilon: float = 1e-3) -> ScalingConstants:
    """``(ln K, alpha, beta, gamma)`` of the scaled ratio bound ``K c^-beta e^(alpha c)``.

    ``params`` holds ``eta`` (value mode) or ``theta``/``delta`` (distance).
    Density priors use ``K'`` (prior product flipped).
    """
    params = params or {}
    if not epsilon > 0:
        raise PreconditionError("epsilon must be > 0")
    x, mu_v, dens = _reduced(solution, mu)
    m = x.size
    log_K = _log_block(x, mu_v, rng.s1, rng.s2, dens, c4_variant="floor")
    if mode == "value":
        eta = params["eta"]
        alpha = -eta * solution.g_star if dens else eta * solution.g_star
    elif mode == "distance":
        theta, delta = params["theta"], params.get("delta", 0.0)
        gt = params.get("g_tilde", _g_tilde(solution))
        alpha = theta**2 * k_factor(theta, x) * float(np.abs(x).max()) - delta * gt
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if not alpha > 0:
        raise NoConcentration(f"alpha = {alpha:.4g} <= 0: no concentration at this parameterization")
    beta = m - 0.5
    gamma = math.log(1 / epsilon) - log_K
    return ScalingConstants(log_K, alpha, beta, gamma)


def _f(c, alpha, beta, gamma):
    return alpha * c - beta * math.log(c) - gamma


def c3_bracket(alpha: float, beta: float, gamma: float) -> tuple:
    lo = gamma / alpha
    if alpha <= beta + gamma:
        hi = lo + 2 * beta / alpha * math.log((beta + gamma) / alpha)
    else:
        hi = lo + math.log(gamma / alpha)
    return lo, hi


def c3_root(alpha: float, beta: float, gamma: float) -> float:
    """Smallest-threshold solution of ``alpha c - beta ln c - gamma = 0``.

    Piecewise: 1 when ``alpha >= gamma``; ``max(1, beta/alpha)`` when ``f``
    is nonnegative there; else the root beyond ``max(beta/alpha, 1)`` by
    bisection and a Newton polish.
    """
    if not alpha > 0 or not gamma > 0:
        raise PreconditionError("c3 needs alpha > 0 and gamma > 0")
    if alpha >= gamma:
        return 1.0
    c0 = beta / alpha
    if c0 > 0 and _f(c0, alpha, beta, gamma) >= 0:
        return max(1.0, c0)
    lo = max(c0, 1.0)
    hi = 2 * lo
    while _f(hi, alpha, beta, gamma) < 0:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _f(mid, alpha, beta, gamma) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    c = hi
    for _ in range(20):
        fc = _f(c, alpha, beta, gamma)
        if abs(fc) <= 1e-10:
            break
        c -= fc / (alpha - beta / c)
    return c


def _c1_value(x, mu, g_star, eta, dens, eta_condition="printed"):
    m = x.size
    s = x.sum()
    chi = x / s
    P = float(np.sum(np.log(1.0 / (mu * chi)))) if dens else float(np.sum(np.log(mu / chi)))
    if eta_condition == "printed":
        Q = float(np.sum(1.0 / (x - 0.5))) - m * m / (4 * s)
    elif eta_condition == "derived":
        Q = float(np.sum(1.0 / (x - 0.5))) - m * m / s
    else:
        raise ValueError(eta_condition)
    a = eta * abs(g_star)
    p, q = P / 2, Q / 8
    return (p + math.sqrt(p * p + 4 * a * q)) / (2 * a) if p * p + 4 * a * q >= 0 else 0.0


def threshold(solution: Solution, rng: SumRange, mu: Optional[Prior] = None, mode: str = "value", params: dict = None, epsilon: float = 1e-3, rho_norm: str = "row-l1", eta_condition: str = "printed") -> ConcentrationReport:
    """Concentration threshold ``c_hat = max(c1, c2, c3)`` with all constants."""
    params = dict(params or {})
    x, mu_v, dens = _reduced(solution, mu)
    _check_half(x)
    delta = float(params.get("delta", 0.0))
    rho = _rho(solution, rho_norm)
    gt = _g_tilde(solution)
    cc = c_constants(solution, rng, mu)
    sc = scaling_constants(solution, rng, mu, mode, {**params, "g_tilde": gt}, epsilon)
    c3 = c3_root(sc.alpha, sc.beta, sc.gamma)
    flags = Preconditions()
    flags.add("x_star_gt_half", True, "x* > 1/2")
    c_delta = 1 / (2 * delta * rho) if delta > 0 else math.inf
    kf = float("nan")
    if mode == "value":
        eta = params["eta"]
        c1 = max(_c1_value(x, mu_v, solution.g_star, eta, dens, eta_condition), c_delta, 1.0)
        c2 = None
        if dens:
            log_bound = _log_block(x, mu_v, rng.s1, rng.s2, True) - eta * solution.g_star
            floor = _eta_floor(x, mu_v, solution.g_star, True)
            bflags = Preconditions()
            bflags.add("delta_ge_half_inv_rho", delta >= 1 / (2 * rho), f"delta >= 1/(2 rho_inf) = {1 / (2 * rho):.4g}")
            bflags.add("eta_floor", eta >= floor, f"eta >= {floor:.4g} puts nu* in A")
        else:
            log_bound, bflags = value_ratio_bound(solution, rng, mu, eta, delta, rho_norm)
    else:
        theta = params["theta"]
        kf = k_factor(theta, x)
        xinf = float(np.abs(x).max())
        c1 = 1 / (2 * theta * xinf)
        c2 = c_delta
        log_bound, bflags = distance_ratio_bound(solution, rng, mu, theta, delta, gt, rho_norm)
    for name, (ok, msg) in bflags.flags.items():
        if name != "x_star_gt_half":
            flags.add(f"bound_{name}", ok, msg + " (unscaled bound)")
    c_hat = max(c1, c3, c2 if c2 is not None else -math.inf)
    # c3 checks
    lo, hi = c3_bracket(sc.alpha, sc.beta, sc.gamma)
    f3 = _f(c3, sc.alpha, sc.beta, sc.gamma)
    is_root = sc.alpha < sc.gamma and not (sc.beta / sc.alpha > 0 and _f(sc.beta / sc.alpha, sc.alpha, sc.beta, sc.gamma) >= 0)
    if is_root:
        flags.add("c3_bracket", lo - 1e-9 <= c3 <= hi + 1e-9, f"{lo:.6g} <= c3 <= {hi:.6g}")
    else:
        flags.add("c3_bracket", f3 >= -1e-9 and c3 >= 1, "clamped c3 satisfies f(c3) >= 0")
    if math.isfinite(c_hat):
        cmin = max(c_hat, sc.beta / sc.alpha)
        flags.add("f_nonneg_beyond_c_hat", _f(cmin, sc.alpha, sc.beta, sc.gamma) >= -1e-9, "K c^-beta e^(alpha c) >= 1/eps for all c >= c_hat")
        delivered = sc.log_K - sc.beta * math.log(c_hat) + sc.alpha * c_hat
        flags.add("delivers_epsilon", delivered >= math.log(1 / epsilon) - 1e-9, "K c_hat^-beta e^(alpha c_hat) >= 1/eps")
    else:
        msg = "no finite threshold: delta = 0 never satisfies delta >= 1/(2 c rho_inf)"
        flags.add("f_nonneg_beyond_c_hat", False, msg)
        flags.add("delivers_epsilon", False, msg)
    return ConcentrationReport(
        mode=mode,
        prior_kind="density" if dens else "count-like",
        log_C0=cc.log_C0,
        log_C1=cc.log_C1,
        log_C2=cc.log_C2,
        log_C3=cc.log_C3,
        log_C4=cc.log_C4,
        g_tilde=gt,
        k_factor=kf,
        alpha=sc.alpha,
        beta=sc.beta,
        log_gamma_inputs=(math.log(1 / epsilon), -sc.log_K),
        c1=c1,
        c2=c2,
        c3=c3,
        c_hat=c_hat,
        log_ratio_bound=log_bound,
        preconditions_ok=flags,
        log_K=sc.log_K,
        gamma=sc.gamma,
        rho_inf=rho,
        eta_condition=eta_condition,
    )


def prob_ratio_bound(solution: Solution, rng: SumRange, mu: Optional[Prior] = None, mode: str = "value", params: dict = None, c: float = 1.0) -> float:
    """Log lower bound on ``Pr(nu*) / Pr(B)`` for a density prior, scaled by ``c``.

    The scaled instance is evaluated directly: ``x* -> c x*``,
    ``G* -> c G*``, ``(s1, s2) -> (c s1, c s2)``, ``G~ -> c G~``.
    """
    params = params or {}
    if c < 1:
        raise PreconditionError("scaling factor must be >= 1")
    x, mu_v, dens = _reduced(solution, mu)
    if not dens:
        raise PreconditionError("probabilistic bounds need a density prior")
    xc = c * x
    block = _log_block(xc, mu_v, c * rng.s1, c * rng.s2, True)
    if mode == "value":
        eta = params["eta"]
        if not eta > 0:
            raise PreconditionError("eta must be > 0")
        return block - eta * c * solution.g_star
    if mode == "distance":
        theta, delta = params["theta"], params.get("delta", 0.0)
        gt = params.get("g_tilde", _g_tilde(solution))
        return block + theta**2 * k_factor(theta, xc) * float(xc.max()) - delta * c * gt
    raise ValueError(f"unknown mode {mode!r}")
