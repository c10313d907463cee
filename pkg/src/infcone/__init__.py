"""Numerical toolkit for variational analysis at infinity.

Computes normal cones at infinity, coderivatives at infinity and
subdifferentials at infinity for sets, functions and set-valued mappings
described by piecewise inequality/equality systems, and runs checker
batteries for well-posedness (nonsingularity, linear openness, metric
regularity, Lipschitz-like properties) and for the Fermat rule at infinity
in set-valued optimization.
"""

from .cones import RayCone, HSlice, Status, canonicalize, polar_cone, \
    cone_distance, cone_sum, cone_intersect, cone_negate, \
    contains_direction, slice_hmap, hmap_kernel, phm_norm
from .config import RunConfig
from .dsl import parse_problem, ProblemDef, ParseError
from .sets import ClosedSet, ProjectionResult, Shell
from .maps import MultiMap

__version__ = "0.1.0"

__all__ = [
    "RayCone", "HSlice", "Status", "canonicalize", "polar_cone",
    "cone_distance", "cone_sum", "cone_intersect", "cone_negate",
    "contains_direction", "slice_hmap", "hmap_kernel", "phm_norm",
    "RunConfig", "parse_problem", "ProblemDef", "ParseError",
    "ClosedSet", "ProjectionResult", "Shell", "MultiMap", "__version__",
]
