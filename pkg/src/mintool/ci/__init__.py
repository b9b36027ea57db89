"""Piecewise-affine constructions: rank-one connections, laminates and the H1/H2 stripes."""

from .algebra import check_lemma_algebra, in_H1, in_H2, project_H1, project_H2, rank_one_connection
from .geometry import AffinePiece, PiecewiseAffineMap
from .laminate import (
    LaminateInfeasibleError,
    LaminateSpec,
    audit_laminate,
    build_laminate,
    gradient_stats,
    h1h2_critical_map,
    null_lagrangian_check,
)

__all__ = [
    "AffinePiece",
    "LaminateInfeasibleError",
    "LaminateSpec",
    "PiecewiseAffineMap",
    "audit_laminate",
    "build_laminate",
    "check_lemma_algebra",
    "gradient_stats",
    "h1h2_critical_map",
    "in_H1",
    "in_H2",
    "null_lagrangian_check",
    "project_H1",
    "project_H2",
    "rank_one_connection",
]
