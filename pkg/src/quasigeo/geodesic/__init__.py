"""Quasi-geodesic paths and the all-pairs distance operator."""

from .matrix import (
    GeodesicMatrix,
    all_pairs,
    cache_path,
    cache_read,
    cache_write,
    cached_all_pairs,
    check_geodesic_ready,
    relay_repair,
    symmetrize,
)
from .paths import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    CrossingAngles,
    PathNode,
    SurfacePath,
    crossing_angles,
    discrete_geodesic_curvature,
    initial_path,
    max_curvature,
    quasi_geodesic,
    straighten,
)

__all__ = [
    "DEFAULT_MAX_ITER", "DEFAULT_TOL", "CrossingAngles", "GeodesicMatrix", "PathNode",
    "SurfacePath", "all_pairs", "cache_path", "cache_read", "cached_all_pairs", "cache_write", "check_geodesic_ready",
    "crossing_angles", "discrete_geodesic_curvature", "initial_path", "max_curvature",
    "quasi_geodesic", "relay_repair", "straighten", "symmetrize",
]
