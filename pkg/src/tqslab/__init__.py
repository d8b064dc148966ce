"""Finite-dimensional laboratory for translational quantum systems."""

__version__ = "0.1.0"

from .errors import TQSError  # noqa: E402
from .hilbert import (  # noqa: E402
    TOL_ALG,
    TOL_SPEC,
    GridSpec,
    Operator,
    StateVector,
    evolve,
    propagator,
    translation_generator,
    translational_certificate,
)

__all__ = [
    "__version__",
    "TOL_ALG",
    "TOL_SPEC",
    "GridSpec",
    "Operator",
    "StateVector",
    "TQSError",
    "evolve",
    "propagator",
    "translation_generator",
    "translational_certificate",
]
