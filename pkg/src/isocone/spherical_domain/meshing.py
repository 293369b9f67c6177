"""Mesh generation for spherical domains.

Points are placed on the sphere (boundary samples at arc-length spacing,
interior points from a Fibonacci lattice), smoothed by a few rounds of
spring relaxation, and connected by a Delaunay triangulation computed in the
stereographic projection about the domain center. Stereographic projection
maps circles on S^2 to circles in the plane, so the planar Delaunay
triangulation is the spherical one and stays well shaped up to the equator.
Triangles whose centroid falls outside the boundary polygon are dropped.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial import Delaunay

from ..sphere import normalize, tangent_frame
from .boundary import PolygonLocator
from .mesh import MeshError, TriangulatedDomain, edge_counts, orient_outward
from .specs import DomainSpec, SpecError

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


def fibonacci_sphere(n: int) -> np.ndarray:
    """``n`` nearly uniform points on S^2."""
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    r = np.sqrt(1.0 - z * z)
    phi = GOLDEN_ANGLE * k
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _domain_center(spec: DomainSpec, boundary: np.ndarray) -> np.ndarray:
    if spec.kind in ("cap", "perturbed_cap"):
        return np.asarray(spec.center, dtype=float)
    return normalize(boundary.sum(axis=0))


def stereographic(p: np.ndarray, center: np.ndarray) -> np.ndarray:
    """Stereographic projection from -center onto the tangent plane at center."""
    frame = np.vstack(tangent_frame(center))
    return (p @ frame.T) / (1.0 + p @ center)[:, None]


def _delaunay(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    return Delaunay(stereographic(points, center)).simplices.astype(np.int64)


def _inside_triangles(points: np.ndarray, tri: np.ndarray, locator: PolygonLocator) -> np.ndarray:
    centroids = normalize(points[tri].sum(axis=1))
    return tri[locator.contains(centroids)]


def _relax(
    points: np.ndarray,
    n_fixed: int,
    spacing: float,
    center: np.ndarray,
    locator: PolygonLocator,
    n_iter: int,
) -> np.ndarray:
    """Spring smoothing of the free (interior) points, boundary points held fixed."""
    p = points.copy()
    tri = None
    for it in range(n_iter):
        if it % 4 == 0:
            tri = _inside_triangles(p, _delaunay(p, center), locator)
            edges, _ = edge_counts(tri)
        vec = p[edges[:, 1]] - p[edges[:, 0]]
        length = np.linalg.norm(vec, axis=1)
        l0 = 1.2 * math.sqrt(np.mean(length**2))
        push = np.maximum(l0 - length, 0.0)
        force = (push / length)[:, None] * vec
        total = np.zeros_like(p)
        np.add.at(total, edges[:, 1], force)
        np.add.at(total, edges[:, 0], -force)
        total[:n_fixed] = 0.0
        trial = normalize(p + 0.2 * total)
        moved = np.arange(len(p)) >= n_fixed
        sd = np.full(len(p), -np.inf)
        sd[moved] = locator.signed_distance(trial[moved], cutoff=spacing)
        ok = ~moved | (sd < -0.35 * spacing)
        p = np.where(ok[:, None], trial, p)
    return p


def triangulate(spec: DomainSpec, h_target: float, relax_iterations: int = 16) -> TriangulatedDomain:
    """Triangulate ``spec`` with geodesic edge lengths around ``h_target``.

    Parameters
    ----------
    spec : DomainSpec
        Validated on entry.
    h_target : float
        Target edge length in radians, ``0 < h_target < size / 4`` where size
        is the aperture (lobe aperture for dumbbells).
    relax_iterations : int
        Rounds of spring smoothing of the interior points.

    Returns
    -------
    TriangulatedDomain
        Boundary spacing at most ``h_target``; boundary vertices come first in
        the vertex array and carry their curve parameters in ``boundary_param``.
    """
    spec.validate()
    limit = spec.size() / 4.0
    if not 0.0 < h_target < limit:
        raise SpecError("h", f"h_target must lie in (0, {limit:.6g}), got {h_target}")
    curve = spec.boundary()
    bpts, bparam = curve.sample(h_target)
    nb = len(bpts)
    center = _domain_center(spec, bpts)
    star = center if spec.kind in ("cap", "perturbed_cap") else None
    locator = PolygonLocator(bpts, star_center=star)

    spacing = 0.8 * h_target
    n_sphere = int(math.ceil(4.0 * math.pi / (0.5 * math.sqrt(3.0) * spacing * spacing)))
    cloud = fibonacci_sphere(n_sphere)
    radius = float(np.max(np.arccos(np.clip(bpts @ center, -1.0, 1.0))))
    cloud = cloud[cloud @ center > math.cos(radius + h_target)]
    sd = locator.signed_distance(cloud, cutoff=spacing)
    interior = cloud[sd < -0.5 * spacing]

    points = np.vstack([bpts, interior])
    points = _relax(points, nb, spacing, center, locator, relax_iterations)

    tri = _inside_triangles(points, _delaunay(points, center), locator)
    used = np.zeros(len(points), dtype=bool)
    used[tri.ravel()] = True
    if not used[:nb].all():
        raise MeshError("boundary vertex lost during triangulation; reduce h_target")
    remap = np.cumsum(used) - 1
    points = points[used]
    tri = orient_outward(points, remap[tri])
    boundary = np.arange(nb)
    return TriangulatedDomain(
        points,
        tri,
        boundary,
        eta=spec.eta,
        spec=spec,
        boundary_param=bparam,
        chart_frame=_chart_frame(spec),
    )


def _chart_frame(spec: DomainSpec) -> np.ndarray:
    if spec.kind in ("cap", "perturbed_cap"):
        return spec.frame
    return np.eye(3)


def refine(mesh: TriangulatedDomain) -> TriangulatedDomain:
    """Uniform red refinement; boundary midpoints are placed on the exact curve.

    Requires a mesh produced by :func:`triangulate` (or a previous refine),
    whose boundary vertices carry curve parameters.
    """
    if mesh.spec is None or mesh.boundary_param is None:
        raise MeshError("refine needs a mesh that remembers its DomainSpec and boundary parameters")
    v, t = mesh.vertices, mesh.triangles
    n = len(v)
    edges, _ = edge_counts(t)
    mid = normalize(v[edges[:, 0]] + v[edges[:, 1]])

    b = mesh.boundary
    nb = len(b)
    t0 = mesh.boundary_param
    t1 = np.roll(t0, -1)
    t1 = np.where(t1 <= t0, t1 + 1.0, t1)
    bmid_param = np.mod(0.5 * (t0 + t1), 1.0)
    bmid = mesh.spec.boundary().points(bmid_param)
    key = {(int(min(a, c)), int(max(a, c))): k for k, (a, c) in enumerate(edges.tolist())}
    bedge_idx = np.array([key[(int(min(a, c)), int(max(a, c)))] for a, c in zip(b, np.roll(b, -1))])
    mid[bedge_idx] = bmid

    new_v = np.vstack([v, mid])
    eid = {e: n + k for e, k in key.items()}

    def m(a, c):
        return np.array([eid[(min(x, y), max(x, y))] for x, y in zip(a.tolist(), c.tolist())])

    a, bb, c = t[:, 0], t[:, 1], t[:, 2]
    ab, bc, ca = m(a, bb), m(bb, c), m(c, a)
    new_t = np.vstack(
        [
            np.column_stack([a, ab, ca]),
            np.column_stack([ab, bb, bc]),
            np.column_stack([ca, bc, c]),
            np.column_stack([ab, bc, ca]),
        ]
    )
    new_b = np.empty(2 * nb, dtype=np.int64)
    new_b[0::2] = b
    new_b[1::2] = n + bedge_idx
    new_param = np.empty(2 * nb)
    new_param[0::2] = t0
    new_param[1::2] = bmid_param
    return TriangulatedDomain(
        new_v,
        new_t,
        new_b,
        eta=mesh.eta,
        spec=mesh.spec,
        boundary_param=new_param,
        chart_frame=mesh.chart_frame,
    )


def map_mesh(base: TriangulatedDomain, target: DomainSpec) -> TriangulatedDomain:
    """Carry a cap mesh onto another star-shaped cap with the same center.

    Each vertex at polar coordinates (theta, phi) about the center moves to
    theta * Theta_target(phi) / Theta_base(phi). Both meshes then share their
    connectivity, which removes meshing noise from eigenvalue differences.
    """
    spec = base.spec
    if spec is None or spec.kind not in ("cap", "perturbed_cap"):
        raise MeshError("map_mesh needs a cap or perturbed-cap base mesh")
    target.validate()
    if target.kind not in ("cap", "perturbed_cap") or not np.allclose(target.center, spec.center):
        raise SpecError("kind", "target must be a (perturbed) cap with the same center as the base")
    frame = spec.frame
    local = base.vertices @ frame.T
    theta = np.arccos(np.clip(local[:, 2], -1.0, 1.0))
    phi = np.arctan2(local[:, 1], local[:, 0])
    theta_new = theta * target.colatitude(phi) / spec.colatitude(phi)
    new_local = np.column_stack(
        [np.sin(theta_new) * np.cos(phi), np.sin(theta_new) * np.sin(phi), np.cos(theta_new)]
    )
    return TriangulatedDomain(
        new_local @ frame,
        base.triangles,
        base.boundary,
        eta=target.eta,
        spec=target,
        boundary_param=None,
        chart_frame=base.chart_frame,
    )
