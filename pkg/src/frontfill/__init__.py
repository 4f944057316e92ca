"""Parallel advancing-front node generation for meshless discretizations."""
from __future__ import annotations

from .candidates import SpherePattern, expand, random_rotation, unit_sphere_pattern
from .fill import (
    FillConfig,
    FillError,
    PointSet,
    bootstrap_seeds,
    estimate_point_count,
    fill_parallel,
    fill_sequential,
    scale_spacing_for_target,
)
from .geometry import (
    Aabb,
    Box,
    Domain,
    DomainError,
    Polygon2D,
    StarPolar2D,
    StarSpherical3D,
    TriMesh3D,
    boundary_sample_2d,
    bounding_box,
    clover2d,
    clover3d,
    contains,
)
from .index import DynamicIndex, StaticIndex, TwoLevelIndex
from .spacing import Constant, Expr, Preset, SpacingError, SpacingFn, eval_spacing, parse_spacing_expr

__version__ = "0.1.0"
