"""Problem representation: priors, linear constraints, spec documents.

A spec document is a JSON object::

    {
      "variables": ["vr", "vg", "vb"],
      "prior": {"values": [1, 1, 1], "kind": "count"},
      "equalities": [{"coeffs": {"vr": 1, "vg": 1}, "rhs": 4}],
      "inequalities": [{"coeffs": {"vg": 1, "vb": 1}, "rhs": 6, "sense": "le"}],
      "tolerance": {"delta": 0.0, "zero_replacement": 1.0}
    }

Numbers may also be given as strings holding a fraction (``"2/15"``).  All
constraint data is kept as exact rationals next to the float arrays used by
the numeric code, so lattice membership can be decided exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from decimal import Decimal
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "SpecError",
    "Prior",
    "LinearConstraint",
    "ToleranceConfig",
    "ProblemSpec",
    "CountVector",
    "parse_spec",
    "serialize_spec",
    "load_spec",
    "error_vectors",
    "in_region",
    "scale_spec",
    "as_fraction",
]

PRIOR_KINDS = ("count", "density", "general")
REGION_SLACK = 1e-9


class SpecError(ValueError):
    """Malformed or invalid problem specification."""


def as_fraction(value) -> Fraction:
    """Exact rational for a spec number; floats are read through their repr."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise SpecError(f"not a number: {value!r}")
    if isinstance(value, np.integer):
        value = int(value)
    if isinstance(value, (int, Decimal)):
        return Fraction(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not np.isfinite(value):
            raise SpecError(f"non-finite number: {value!r}")
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise SpecError(f"not a number: {value!r}") from exc
    raise SpecError(f"not a number: {value!r}")


def _json_number(q: Fraction):
    if q.denominator == 1:
        return int(q)
    f = float(q)
    if Fraction(repr(f)) == q:
        return f
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class Prior:
    """Positive prior vector (the bin-array shape)."""

    exact: tuple[Fraction, ...]
    kind: str = "general"

    def __post_init__(self):
        object.__setattr__(self, "exact", tuple(as_fraction(v) for v in self.exact))
        if self.kind not in PRIOR_KINDS:
            raise SpecError(f"unknown prior kind {self.kind!r}")
        if any(v <= 0 for v in self.exact):
            raise SpecError("nonpositive prior entry")
        if self.kind == "count" and any(v < 1 for v in self.exact):
            raise SpecError("count-like prior must have every entry >= 1")
        if self.kind == "density" and abs(float(sum(self.exact)) - 1.0) > 1e-12:
            raise SpecError("density prior must sum to 1")

    @classmethod
    def from_values(cls, values: Iterable, kind: str = "general") -> "Prior":
        return cls(tuple(as_fraction(v) for v in values), kind)

    @cached_property
    def values(self) -> np.ndarray:
        v = np.array([float(q) for q in self.exact])
        v.setflags(write=False)
        return v

    @property
    def m(self) -> int:
        return len(self.exact)

    @cached_property
    def r(self) -> float:
        return float(sum(self.exact))

    @property
    def psi(self) -> np.ndarray:
        return self.values / self.r

    @property
    def is_integral(self) -> bool:
        return all(q.denominator == 1 for q in self.exact)

    @property
    def is_density(self) -> bool:
        return sum(self.exact) == 1 or self.kind == "density"

    def normalized(self) -> "Prior":
        t = sum(self.exact)
        return Prior(tuple(q / t for q in self.exact), "density")

    def scaled(self, alpha) -> "Prior":
        a = as_fraction(alpha)
        vals = tuple(q * a for q in self.exact)
        kind = "count" if all(v >= 1 for v in vals) else "general"
        return Prior(vals, kind)


@dataclass(frozen=True)
class LinearConstraint:
    """One row ``sum_j coeffs[j] x_j (= | <=) rhs``."""

    coeffs: tuple[tuple[int, Fraction], ...]
    rhs: Fraction
    sense: str = "le"

    def __post_init__(self):
        items = tuple(sorted((int(j), as_fraction(a)) for j, a in dict(self.coeffs).items()))
        items = tuple((j, a) for j, a in items if a != 0)
        if not items:
            raise SpecError("constraint has no nonzero coefficient")
        if self.sense not in ("eq", "le"):
            raise SpecError(f"unknown constraint sense {self.sense!r}")
        object.__setattr__(self, "coeffs", items)
        object.__setattr__(self, "rhs", as_fraction(self.rhs))

    def row(self, m: int) -> np.ndarray:
        out = np.zeros(m)
        for j, a in self.coeffs:
            out[j] = float(a)
        return out


@dataclass(frozen=True)
class ToleranceConfig:
    delta: Fraction = Fraction(0)
    zero_replacement: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "delta", as_fraction(self.delta))
        object.__setattr__(self, "zero_replacement", as_fraction(self.zero_replacement))
        if self.delta < 0:
            raise SpecError("tolerance delta must be >= 0")
        if self.zero_replacement <= 0:
            raise SpecError("zero_replacement must be > 0")


def _matrix(rows: Sequence[LinearConstraint], m: int) -> np.ndarray:
    if not rows:
        return np.zeros((0, m))
    return np.vstack([c.row(m) for c in rows])


@dataclass(frozen=True)
class ProblemSpec:
    """Constraint structure ``Ax = b, Cx <= d, x >= 0`` plus a prior."""

    variable_names: tuple[str, ...]
    prior: Prior
    equalities: tuple[LinearConstraint, ...] = ()
    inequalities: tuple[LinearConstraint, ...] = ()
    tolerance: ToleranceConfig = field(default_factory=ToleranceConfig)

    def __post_init__(self):
        object.__setattr__(self, "variable_names", tuple(self.variable_names))
        object.__setattr__(self, "equalities", tuple(self.equalities))
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        m = len(self.variable_names)
        if m < 2:
            raise SpecError("need at least 2 variables (m >= 2)")
        if len(set(self.variable_names)) != m:
            raise SpecError("duplicate variable names")
        if self.prior.m != m:
            raise SpecError(f"prior has length {self.prior.m}, expected {m}")
        for c in self.equalities + self.inequalities:
            if c.coeffs[-1][0] >= m or c.coeffs[0][0] < 0:
                raise SpecError("constraint index out of range")
        if any(c.sense != "eq" for c in self.equalities):
            raise SpecError("equality block holds a non-equality row")
        if any(c.sense != "le" for c in self.inequalities):
            raise SpecError("inequality block holds a non-<= row")

    @property
    def m(self) -> int:
        return len(self.variable_names)

    @cached_property
    def A(self) -> np.ndarray:
        return _matrix(self.equalities, self.m)

    @cached_property
    def b(self) -> np.ndarray:
        return np.array([float(c.rhs) for c in self.equalities])

    @cached_property
    def C(self) -> np.ndarray:
        return _matrix(self.inequalities, self.m)

    @cached_property
    def d(self) -> np.ndarray:
        return np.array([float(c.rhs) for c in self.inequalities])

    @property
    def n_constraints(self) -> int:
        return len(self.equalities) + len(self.inequalities)

    def with_prior(self, prior: Prior) -> "ProblemSpec":
        return replace(self, prior=prior)

    def with_tolerance(self, **kw) -> "ProblemSpec":
        return replace(self, tolerance=replace(self.tolerance, **kw))

    def with_equality(self, coeffs: Mapping[int, object], rhs) -> "ProblemSpec":
        row = LinearConstraint(tuple(coeffs.items()), rhs, "eq")
        return replace(self, equalities=self.equalities + (row,))


@dataclass(frozen=True)
class CountVector:
    """Vector of naturals with its cached sum."""

    entries: tuple[int, ...]

    def __post_init__(self):
        ent = tuple(int(v) for v in self.entries)
        if any(v < 0 for v in ent):
            raise ValueError("count vector entries must be natural numbers")
        object.__setattr__(self, "entries", ent)

    @property
    def n(self) -> int:
        return sum(self.entries)

    @property
    def m(self) -> int:
        return len(self.entries)

    def as_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


# ---------------------------------------------------------------- documents


def _parse_row(raw, index: Mapping[str, int], default_sense: str) -> LinearConstraint:
    if not isinstance(raw, Mapping) or "coeffs" not in raw or "rhs" not in raw:
        raise SpecError("constraint must be an object with 'coeffs' and 'rhs'")
    if not isinstance(raw["coeffs"], Mapping):
        raise SpecError("'coeffs' must map variable names to numbers")
    coeffs = {}
    for name, a in raw["coeffs"].items():
        if name not in index:
            raise SpecError(f"unknown variable {name!r} in constraint")
        coeffs[index[name]] = coeffs.get(index[name], Fraction(0)) + as_fraction(a)
    rhs = as_fraction(raw["rhs"])
    sense = raw.get("sense", default_sense)
    if default_sense == "eq":
        if sense != "eq":
            raise SpecError("equalities may only carry sense 'eq'")
        return LinearConstraint(tuple(coeffs.items()), rhs, "eq")
    if sense == "ge":
        return LinearConstraint(tuple((j, -a) for j, a in coeffs.items()), -rhs, "le")
    if sense != "le":
        raise SpecError(f"unknown inequality sense {sense!r}")
    return LinearConstraint(tuple(coeffs.items()), rhs, "le")


def parse_spec(text: str) -> ProblemSpec:
    """Parse and validate a JSON spec document.

    ``>=`` rows are normalized to ``<=`` by negation; variable order is
    document order.
    """
    try:
        doc = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise SpecError(f"malformed document: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise SpecError("malformed document: top level must be an object")
    names = doc.get("variables")
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise SpecError("malformed document: 'variables' must be a list of strings")
    if len(names) < 2:
        raise SpecError("need at least 2 variables (m >= 2)")
    index = {n: i for i, n in enumerate(names)}
    raw_prior = doc.get("prior")
    if not isinstance(raw_prior, Mapping) or "values" not in raw_prior:
        raise SpecError("malformed document: 'prior' must hold 'values'")
    kind = raw_prior.get("kind", "general")
    values = [as_fraction(v) for v in raw_prior["values"]]
    if any(v <= 0 for v in values):
        raise SpecError("nonpositive prior entry")
    prior = Prior(tuple(values), kind)

    eqs = tuple(_parse_row(r, index, "eq") for r in doc.get("equalities", []) or [])
    ineqs = tuple(_parse_row(r, index, "le") for r in doc.get("inequalities", []) or [])
    tol_raw = doc.get("tolerance") or {}
    if not isinstance(tol_raw, Mapping):
        raise SpecError("malformed document: 'tolerance' must be an object")
    tol = ToleranceConfig(
        as_fraction(tol_raw.get("delta", 0)),
        as_fraction(tol_raw.get("zero_replacement", 1)),
    )
    return ProblemSpec(tuple(names), prior, eqs, ineqs, tol)


def _row_doc(c: LinearConstraint, names: Sequence[str], with_sense: bool) -> dict:
    out = {
        "coeffs": {names[j]: _json_number(a) for j, a in c.coeffs},
        "rhs": _json_number(c.rhs),
    }
    if with_sense:
        out["sense"] = "le"
    return out


def serialize_spec(spec: ProblemSpec) -> str:
    """Inverse of :func:`parse_spec` (``>=`` rows come back as ``<=``)."""
    names = spec.variable_names
    doc = {
        "variables": list(names),
        "prior": {
            "values": [_json_number(q) for q in spec.prior.exact],
            "kind": spec.prior.kind,
        },
        "equalities": [_row_doc(c, names, False) for c in spec.equalities],
        "inequalities": [_row_doc(c, names, True) for c in spec.inequalities],
        "tolerance": {
            "delta": _json_number(spec.tolerance.delta),
            "zero_replacement": _json_number(spec.tolerance.zero_replacement),
        },
    }
    return json.dumps(doc, indent=2)


def load_spec(path) -> ProblemSpec:
    return parse_spec(Path(path).read_text(encoding="utf-8"))


# ------------------------------------------------------------- tolerances


def error_vectors(spec: ProblemSpec) -> tuple[np.ndarray, np.ndarray]:
    """Error vectors ``(b_tilde, d_tilde)``: ``|rhs|`` with zeros replaced."""
    z = float(spec.tolerance.zero_replacement)
    bt = np.where(spec.b != 0, np.abs(spec.b), z)
    dt = np.where(spec.d != 0, np.abs(spec.d), z)
    return bt, dt


def exact_error_vectors(spec: ProblemSpec) -> tuple[list[Fraction], list[Fraction]]:
    z = spec.tolerance.zero_replacement
    bt = [abs(c.rhs) if c.rhs != 0 else z for c in spec.equalities]
    dt = [abs(c.rhs) if c.rhs != 0 else z for c in spec.inequalities]
    return bt, dt


def in_region(x, spec: ProblemSpec, delta: float) -> bool:
    """Membership of ``x`` in the widened polytope C(delta), slack 1e-9."""
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.m,):
        raise ValueError(f"expected a vector of length {spec.m}")
    if np.any(x < -REGION_SLACK):
        return False
    bt, dt = error_vectors(spec)
    if spec.equalities:
        ax = spec.A @ x
        if np.any(ax < spec.b - delta * bt - REGION_SLACK):
            return False
        if np.any(ax > spec.b + delta * bt + REGION_SLACK):
            return False
    if spec.inequalities:
        if np.any(spec.C @ x > spec.d + delta * dt + REGION_SLACK):
            return False
    return True


def scale_spec(spec: ProblemSpec, c) -> ProblemSpec:
    """Multiply the constraint values ``b, d`` by ``c >= 1``."""
    cq = as_fraction(c)
    if cq < 1:
        raise SpecError("scaling factor must be >= 1")
    eqs = tuple(replace(r, rhs=r.rhs * cq) for r in spec.equalities)
    ineqs = tuple(replace(r, rhs=r.rhs * cq) for r in spec.inequalities)
    return replace(spec, equalities=eqs, inequalities=ineqs)
