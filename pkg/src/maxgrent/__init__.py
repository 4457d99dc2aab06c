"""Maximum generalized relative entropy on count vectors, with exact oracles."""

from .model import (
    CountVector,
    LinearConstraint,
    Prior,
    ProblemSpec,
    SpecError,
    ToleranceConfig,
    error_vectors,
    in_region,
    load_spec,
    parse_spec,
    scale_spec,
    serialize_spec,
)

__all__ = [
    "CountVector",
    "LinearConstraint",
    "Prior",
    "ProblemSpec",
    "SpecError",
    "ToleranceConfig",
    "error_vectors",
    "in_region",
    "load_spec",
    "parse_spec",
    "scale_spec",
    "serialize_spec",
]

__version__ = "0.1.0"
