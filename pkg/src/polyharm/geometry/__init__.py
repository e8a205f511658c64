"""Polyhedra, sphere utilities and face-tangent sector partitions."""
from .partition import (BOUNDARY, Sector, SectorPartition, classify_direction,
                        classify_directions, partition_from_circles, tangent_partition)
from .polyhedron import Polyhedron, build_convex, build_prism, solid_angle_polygon
from .sphere import (SphericalPolygon, inverse_stereographic, normalize, polygon_area,
                     stereographic, triangle_signed_area)

__all__ = [
    "BOUNDARY", "Polyhedron", "Sector", "SectorPartition", "SphericalPolygon",
    "build_convex", "build_prism", "classify_direction", "classify_directions",
    "inverse_stereographic", "normalize", "partition_from_circles", "polygon_area",
    "solid_angle_polygon", "stereographic", "tangent_partition", "triangle_signed_area",
]
