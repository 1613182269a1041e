"""Numerical geometry of space-like submanifolds and self-shrinkers in R^{n+m}_m."""

from .ambient import Signature, LorentzFrame, inner, gram, causal_character, boost, orthonormal_frame
from .graph import (
    SpacelikeGraph,
    PolynomialGraph,
    PointGeometry,
    DerivedTensors,
    point_geometry,
    derived_tensors,
    shrinker_residual,
    hess_z,
    laplace_z,
    lagrangian_graph,
)

__version__ = "0.1.0"
