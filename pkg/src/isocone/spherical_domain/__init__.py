"""Spherical domains: specifications, boundary curves, meshes and measurements."""

from .boundary import BoundaryCurve, PolygonLocator, boundary_curve
from .measures import ClassReport, area, check_class, hausdorff_boundary_distance, is_cone_convex
from .mesh import MeshError, TriangulatedDomain, mesh_quality, total_boundary_length
from .meshing import map_mesh, refine, triangulate
from .specs import DomainSpec, FourierMode, SpecError


def rotate_mesh(mesh: TriangulatedDomain, R) -> TriangulatedDomain:
    """Rigidly rotate ``mesh`` (vertices and chart frame) by the rotation matrix ``R``."""
    return mesh.rotated(R)


__all__ = [
    "BoundaryCurve",
    "ClassReport",
    "DomainSpec",
    "FourierMode",
    "MeshError",
    "PolygonLocator",
    "SpecError",
    "TriangulatedDomain",
    "area",
    "boundary_curve",
    "check_class",
    "hausdorff_boundary_distance",
    "is_cone_convex",
    "map_mesh",
    "mesh_quality",
    "refine",
    "rotate_mesh",
    "total_boundary_length",
    "triangulate",
]
