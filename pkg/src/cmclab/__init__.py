"""Numerical laboratory for spacelike constant-mean-curvature graphs over
convex planar domains: solver, closed-form oracles, and desk-scale
verification of the sharp gradient/height bounds, extremum principles, and
critical-point uniqueness."""

__version__ = "0.1.0"

from .domain import ConvexDomain, DomainError, build_domain, curvature_at
from .mesh import MeshError, TriMesh, triangulate
from .solver import (
    GraphSolution,
    NonSpacelikeError,
    SolverError,
    SolverOptions,
    assemble,
    continuation,
    newton_solve,
)

__all__ = [
    "ConvexDomain",
    "DomainError",
    "GraphSolution",
    "MeshError",
    "NonSpacelikeError",
    "SolverError",
    "SolverOptions",
    "TriMesh",
    "__version__",
    "assemble",
    "build_domain",
    "continuation",
    "curvature_at",
    "newton_solve",
    "triangulate",
]
