"""Geometric measurements on triangulated spherical domains."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..sphere import chord_to_angle, geodesic_distance, normalize, slerp
from .boundary import PolygonLocator, polyline_tangents
from .mesh import TriangulatedDomain, boundary_arclength
from .specs import CONTAINMENT_TOL




def area(mesh: TriangulatedDomain) -> float:
    """Total spherical area (steradians)."""
    return float(np.sum(mesh.area_weights))


def boundary_locator(mesh: TriangulatedDomain) -> PolygonLocator:
    """Point location against the boundary polyline of ``mesh``."""
    pts = mesh.boundary_points
    try:
        return PolygonLocator(pts)
    except ValueError:
        # boundary reaches the equator of its centroid (hemisphere-like domains)
        return PolygonLocator(pts, star_center=normalize(pts.sum(axis=0)))


def densified_boundary(mesh: TriangulatedDomain, spacing: float) -> np.ndarray:
    """Boundary polyline of ``mesh`` resampled along its geodesic edges at ``spacing`` or finer."""
    p = mesh.boundary_points
    q = np.roll(p, -1, axis=0)
    lengths = geodesic_distance(p, q)
    k = max(int(np.ceil(lengths.max() / spacing)), 1)
    t = (np.arange(k) / k)[None, :, None]
    w = lengths[:, None, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        s0 = np.where(w > 1e-15, np.sin((1.0 - t) * w) / np.sin(w), 1.0 - t)
        s1 = np.where(w > 1e-15, np.sin(t * w) / np.sin(w), t)
    return (s0 * p[:, None, :] + s1 * q[:, None, :]).reshape(-1, 3)


def hausdorff_boundary_distance(a: TriangulatedDomain, b: TriangulatedDomain, spacing: float = 1e-3) -> float:
    """Symmetric Hausdorff distance between the boundary polylines, in radians.

    Both polylines are resampled at ``spacing``, so the result is within
    ``spacing / 2`` of the exact polyline distance.
    """
    if len(a.boundary) == 0 or len(b.boundary) == 0:
        raise ValueError("empty boundary")
    pa, pb = densified_boundary(a, spacing), densified_boundary(b, spacing)
    d_ab = cKDTree(pb).query(pa, k=1)[0]
    d_ba = cKDTree(pa).query(pb, k=1)[0]
    return float(chord_to_angle(max(d_ab.max(), d_ba.max())))


@dataclass(frozen=True)
class ClassReport:
    """Outcome of the discrete membership test for the class of domains
    compactly inside {x3 > eta} with interior and exterior balls of radius r."""

    contained_in_cap: bool
    interior_ball_ok: bool
    exterior_ball_ok: bool
    min_clearance_to_cap_boundary: float
    worst_violation_location: float | None
    worst_violation_depth: float
    r_tested: float
    eta: float

    @property
    def in_class(self) -> bool:
        return self.contained_in_cap and self.interior_ball_ok and self.exterior_ball_ok

    def to_dict(self) -> dict:
        return {
            "in_class": self.in_class,
            "contained_in_cap": self.contained_in_cap,
            "interior_ball_ok": self.interior_ball_ok,
            "exterior_ball_ok": self.exterior_ball_ok,
            "min_clearance_to_cap_boundary": self.min_clearance_to_cap_boundary,
            "worst_violation_location": self.worst_violation_location,
            "worst_violation_depth": self.worst_violation_depth,
            "r_tested": self.r_tested,
            "eta": self.eta,
        }


def ball_offsets(r: float, spacing: float) -> tuple[np.ndarray, np.ndarray]:
    """Polar sample pattern (rho, psi) of a geodesic disk: rings spaced ``spacing``."""
    rhos, psis = [0.0], [0.0]
    n_rings = max(1, int(math.ceil(r / spacing)))
    for j in range(1, n_rings + 1):
        rho = r * j / n_rings
        n = max(6, int(math.ceil(2.0 * math.pi * math.sin(rho) / spacing)))
        rhos.extend([rho] * n)
        psis.extend((2.0 * math.pi * np.arange(n) / n).tolist())
    return np.asarray(rhos), np.asarray(psis)


def _balls(centers: np.ndarray, toward: np.ndarray, rho: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Sample points of the disks about ``centers``; the frame is fixed by ``toward``."""
    e1 = toward - np.einsum("ij,ij->i", toward, centers)[:, None] * centers
    e1 = normalize(e1)
    e2 = np.cross(centers, e1)
    cr, sr = np.cos(rho), np.sin(rho)
    cp, sp = np.cos(psi), np.sin(psi)
    return (
        cr[None, :, None] * centers[:, None, :]
        + (sr * cp)[None, :, None] * e1[:, None, :]
        + (sr * sp)[None, :, None] * e2[:, None, :]
    )


def check_class(mesh: TriangulatedDomain, eta: float, r: float) -> ClassReport:
    """Discrete test of containment in {x3 > eta} and of the r-ball conditions.

    At every boundary vertex x the discrete inward normal n = x cross T (T the
    central-difference tangent) places the ball centers cos(r) x +- sin(r) n.
    Each ball is sampled on rings spaced h/2. A sample of the interior ball
    must lie in the domain, a sample of the exterior ball outside it; samples
    within h of the boundary polyline are counted as boundary and accepted.
    """
    h = mesh.h
    if h > r / 5.0:
        warnings.warn(
            f"mesh resolution h={h:.4g} exceeds r/5={r / 5:.4g}; the discrete ball test is unreliable",
            stacklevel=2,
        )
    v = mesh.vertices
    x3 = v[:, 2]
    # a gap at rounding level (cap boundary placed exactly on x3 = eta) counts as touching
    contained = bool(np.min(x3 - eta) > CONTAINMENT_TOL)
    clearance = float(np.min(math.acos(eta) - np.arccos(np.clip(x3, -1.0, 1.0))))

    pts = mesh.boundary_points
    tangents = polyline_tangents(pts)
    normals = np.cross(pts, tangents)
    locator = boundary_locator(mesh)
    rho, psi = ball_offsets(r, 0.5 * h)
    params = boundary_arclength(mesh)

    worst_loc, worst_depth = None, 0.0
    ok = {}
    for side, sign in (("interior", 1.0), ("exterior", -1.0)):
        centers = math.cos(r) * pts + sign * math.sin(r) * normals
        samples = _balls(centers, pts, rho, psi)
        flat = samples.reshape(-1, 3)
        sd = locator.signed_distance(flat, cutoff=2.0 * h).reshape(samples.shape[:2])
        # depth of each sample on the wrong side beyond the tolerance band h
        depth = (sd if sign > 0 else -sd) - h
        per_vertex = depth.max(axis=1)
        ok[side] = bool(np.all(per_vertex <= 0.0))
        k = int(np.argmax(per_vertex))
        if per_vertex[k] > worst_depth:
            worst_depth, worst_loc = float(per_vertex[k]), float(params[k])
    return ClassReport(
        contained_in_cap=contained,
        interior_ball_ok=ok["interior"],
        exterior_ball_ok=ok["exterior"],
        min_clearance_to_cap_boundary=clearance,
        worst_violation_location=worst_loc,
        worst_violation_depth=worst_depth,
        r_tested=float(r),
        eta=float(eta),
    )


def is_cone_convex(
    mesh: TriangulatedDomain, n_pairs: int = 2000, seed: int = 0, tol: float = 1e-9
) -> bool:
    """Sampled test of geodesic convexity of the domain.

    For ``n_pairs`` random pairs of boundary vertices the minor arc between
    them is sampled at spacing at most h/2; every sample must lie in the
    closed domain (inside, or within ``tol`` of the boundary polyline).
    Inside an open hemisphere this is equivalent to convexity of the cone.
    """
    pts = mesh.boundary_points
    rng = np.random.default_rng(seed)
    i = rng.integers(0, len(pts), size=n_pairs)
    j = rng.integers(0, len(pts), size=n_pairs)
    locator = boundary_locator(mesh)
    spacing = 0.5 * mesh.h
    batch = []
    for a, b in zip(i, j):
        if a == b:
            continue
        length = float(geodesic_distance(pts[a], pts[b]))
        n = max(2, int(math.ceil(length / spacing)) + 1)
        batch.append(slerp(pts[a], pts[b], np.linspace(0.0, 1.0, n))[1:-1])
        if sum(len(x) for x in batch) > 200_000:
            if not _all_inside(np.vstack(batch), locator, tol):
                return False
            batch = []
    if batch and not _all_inside(np.vstack(batch), locator, tol):
        return False
    return True


def _all_inside(p: np.ndarray, locator: PolygonLocator, tol: float) -> bool:
    inside = locator.contains(p)
    if inside.all():
        return True
    return bool(np.all(locator.distance(p[~inside]) <= tol))
