"""Bakry-Emery calculus, heat flow and porous-media flow on weighted graphs."""

__version__ = "0.1.0"

from .graph import (  # noqa: E402
    Domain,
    RootedMetric,
    VertexFunction,
    WeightedGraph,
    ball,
    build_graph,
    rooted_metric,
    whole,
)
from .operators import (  # noqa: E402
    BochnerForm,
    bochner_residual,
    cd_gap,
    curvature_k_star,
    gamma,
    gamma2,
    gamma2_closed_form,
    grad_inner,
    grad_norm_sq,
    hessian_norm_sq,
    laplacian,
    local_curvature,
)
from .trajectory import PMETrajectory, Trajectory, VerificationReport  # noqa: E402

__all__ = [
    "Domain",
    "RootedMetric",
    "VertexFunction",
    "WeightedGraph",
    "ball",
    "build_graph",
    "rooted_metric",
    "whole",
    "BochnerForm",
    "bochner_residual",
    "cd_gap",
    "curvature_k_star",
    "gamma",
    "gamma2",
    "gamma2_closed_form",
    "grad_inner",
    "grad_norm_sq",
    "hessian_norm_sq",
    "laplacian",
    "local_curvature",
    "PMETrajectory",
    "Trajectory",
    "VerificationReport",
]
