"""fatloc: dynamic point location over disjoint fat regions.

A compressed, balanced quadtree over region representative points, an
edge-oracle search tree for logarithmic point location, and marked-ancestor
forests for finding large regions, with local (similar-replacement) updates
that touch only a neighborhood of the change.
"""

from .counters import Counters
from .errors import (
    CoincidentPoints,
    DegenerateShape,
    DuplicatePoint,
    FatLocError,
    MismatchError,
    NotSimilar,
    NotThickEnough,
    OutOfBounds,
    OverlappingInput,
    OverlapViolation,
    ParseError,
    PlacementFailure,
    PrecisionLimit,
    RemoveMarked,
    RemoveNonLeaf,
    UnknownEdge,
    UnknownHandle,
    UnknownNode,
    UnknownPoint,
    ValidationError,
)
from .geometry import (
    CellExtent,
    ConvexRegion,
    Interval1,
    Point2,
    WedgeParams,
    compute_representative,
    contains_point,
    is_rho_similar,
    region_intersects_cell,
    union_diameter,
    wedge_index,
)
from .locate1d import IntervalHandle, IntervalSet
from .locate2d import RegionHandle, RegionStore

__all__ = [
    "CellExtent",
    "ConvexRegion",
    "Counters",
    "Interval1",
    "IntervalHandle",
    "IntervalSet",
    "Point2",
    "RegionHandle",
    "RegionStore",
    "WedgeParams",
    "compute_representative",
    "contains_point",
    "is_rho_similar",
    "region_intersects_cell",
    "union_diameter",
    "wedge_index",
    "FatLocError",
    "CoincidentPoints",
    "DegenerateShape",
    "DuplicatePoint",
    "MismatchError",
    "NotSimilar",
    "NotThickEnough",
    "OutOfBounds",
    "OverlappingInput",
    "OverlapViolation",
    "ParseError",
    "PlacementFailure",
    "PrecisionLimit",
    "RemoveMarked",
    "RemoveNonLeaf",
    "UnknownEdge",
    "UnknownHandle",
    "UnknownNode",
    "UnknownPoint",
    "ValidationError",
]
