"""Tensor calculus, heat semigroups and incompressible flow on
hyperbolic space, discretised in geodesic polar coordinates."""

__version__ = "0.1.0"

from .fields import (  # noqa: F401
    CovectorField,
    FrameTensor,
    Grid,
    ScalarField,
    VectorField,
    l2_inner,
    lp_norm,
)
from .geometry import ManifoldModel  # noqa: F401
