"""Numerical laboratory for planar Sp(4,R) self-duality equations.

Solves the coupled PDE system attached to a polynomial quartic differential,
transports flat frames to build the induced maximal surface in H^{2,2}, and
extracts and validates its light-like polygonal boundary in the Einstein
Universe.
"""

from .quartic import QuarticDifferential, normalize_monic_centered, cyclic_action
from .fields import Grid, FieldPair, SolverConfig

__version__ = "0.1.0"

__all__ = [
    "QuarticDifferential",
    "normalize_monic_centered",
    "cyclic_action",
    "Grid",
    "FieldPair",
    "SolverConfig",
    "__version__",
]
