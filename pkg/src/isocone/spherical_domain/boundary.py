"""Closed boundary curves of spherical domains and point location against them.

Every curve is oriented counterclockwise seen from outside the sphere, so the
domain lies to the left of the tangent and the inward normal at x is x cross T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from ..sphere import chord_to_angle, geodesic_distance, normalize, slerp, tangent_frame
from .specs import DomainSpec, SpecError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Arc:
    """Small-circle arc of geodesic radius ``radius`` about unit vector ``center``.

    ``sweep`` > 0 runs counterclockwise about the center (seen from outside).
    Great-circle segments are arcs of radius pi/2 about their pole.
    """

    center: np.ndarray
    radius: float
    e1: np.ndarray
    e2: np.ndarray
    start: float
    sweep: float

    @classmethod
    def between(cls, center, radius: float, p, q, orientation: int) -> "Arc":
        center = normalize(center)
        e1, e2 = tangent_frame(center)
        psi_p = math.atan2(np.dot(p, e2), np.dot(p, e1))
        psi_q = math.atan2(np.dot(q, e2), np.dot(q, e1))
        sweep = orientation * ((orientation * (psi_q - psi_p)) % TWO_PI)
        return cls(center, float(radius), e1, e2, psi_p, float(sweep))

    @property
    def length(self) -> float:
        return abs(self.sweep) * math.sin(self.radius)

    def points(self, s: np.ndarray) -> np.ndarray:
        psi = self.start + self.sweep * np.asarray(s, dtype=float)
        cr, sr = math.cos(self.radius), math.sin(self.radius)
        return (
            cr * self.center[None, :]
            + sr * (np.cos(psi)[:, None] * self.e1[None, :] + np.sin(psi)[:, None] * self.e2[None, :])
        )


class BoundaryCurve:
    """Closed curve t -> gamma(t), t in [0, 1), reparametrized by arc length.

    ``raw`` maps an arbitrary periodic parameter s in [0, 1] onto the curve;
    a dense table of cumulative geodesic length inverts it.
    """

    def __init__(self, raw: Callable[[np.ndarray], np.ndarray], n_table: int = 16384):
        self._raw = raw
        s = np.linspace(0.0, 1.0, n_table + 1)
        pts = raw(s)
        seg = geodesic_distance(pts[:-1], pts[1:])
        self._s = s
        self._cum = np.concatenate([[0.0], np.cumsum(seg)])
        self.length = float(self._cum[-1])

    def points(self, t: np.ndarray) -> np.ndarray:
        t = np.mod(np.asarray(t, dtype=float), 1.0)
        s = np.interp(t * self.length, self._cum, self._s)
        return normalize(self._raw(s))

    def sample(self, spacing: float) -> tuple[np.ndarray, np.ndarray]:
        """Equally spaced points (arc length <= spacing) and their parameters."""
        n = max(8, int(math.ceil(self.length / spacing - 1e-9)))
        t = np.arange(n) / n
        return self.points(t), t

    def dense_points(self, n: int = 4096) -> np.ndarray:
        return self.points(np.arange(n) / n)


def _chain(arcs: list[Arc]) -> Callable[[np.ndarray], np.ndarray]:
    lengths = np.array([a.length for a in arcs])
    edges = np.concatenate([[0.0], np.cumsum(lengths) / lengths.sum()])

    def raw(s: np.ndarray) -> np.ndarray:
        s = np.mod(np.asarray(s, dtype=float), 1.0)
        idx = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, len(arcs) - 1)
        out = np.empty((len(s), 3))
        for k, arc in enumerate(arcs):
            sel = idx == k
            if np.any(sel):
                local = (s[sel] - edges[k]) / (edges[k + 1] - edges[k])
                out[sel] = arc.points(local)
        return out

    return raw


def _cap_raw(spec: DomainSpec) -> Callable[[np.ndarray], np.ndarray]:
    frame = spec.frame

    def raw(s: np.ndarray) -> np.ndarray:
        phi = TWO_PI * np.asarray(s, dtype=float)
        theta = spec.colatitude(phi)
        local = np.column_stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
        return local @ frame

    return raw


def _polygon_arcs(spec: DomainSpec) -> list[Arc]:
    v = np.asarray(spec.vertices, dtype=float)
    n = len(v)
    # orient counterclockwise about the centroid direction
    c = normalize(v.sum(axis=0))
    signed = sum(np.dot(np.cross(v[i], v[(i + 1) % n]), c) for i in range(n))
    if signed < 0:
        v = v[::-1]
    normals = normalize(np.cross(v, np.roll(v, -1, axis=0)))  # edge i: v[i] -> v[i+1]
    rho = spec.rounding
    corners = []  # per vertex: (fillet arc or None, point entering, point leaving)
    for i in range(n):
        n_in, n_out = normals[i - 1], normals[i]
        convex = np.dot(v[(i + 1) % n], n_in) > 0.0
        if rho == 0.0:
            corners.append((None, v[i], v[i]))
            continue
        sigma = 1.0 if convex else -1.0
        g = float(np.dot(n_in, n_out))
        alpha = sigma * math.sin(rho) / (1.0 + g)
        base = alpha * (n_in + n_out)
        w = normalize(np.cross(n_in, n_out))
        if np.dot(w, v[i]) < 0:
            w = -w
        gamma2 = 1.0 - float(np.dot(base, base))
        if gamma2 <= 0.0:
            raise SpecError("rounding", f"rounding radius {rho} does not fit corner {i}")
        center = base + math.sqrt(gamma2) * w
        t_in = normalize(center - np.dot(center, n_in) * n_in)
        t_out = normalize(center - np.dot(center, n_out) * n_out)
        corners.append((Arc.between(center, rho, t_in, t_out, 1 if convex else -1), t_in, t_out))
    arcs: list[Arc] = []
    for i in range(n):
        fillet, _, leave = corners[i]
        if fillet is not None:
            arcs.append(fillet)
        enter_next = corners[(i + 1) % n][1]
        edge_len = float(geodesic_distance(v[i], v[(i + 1) % n]))
        used = float(
            geodesic_distance(v[i], leave) + geodesic_distance(leave, enter_next)
            + geodesic_distance(enter_next, v[(i + 1) % n])
        )
        if used > edge_len + 1e-9 or edge_len >= math.pi:
            raise SpecError("rounding", f"fillets overlap on edge {i}; reduce rounding")
        arcs.append(Arc.between(normals[i], math.pi / 2, leave, enter_next, 1))
    _check_simple([a for a in arcs if a.length > 0.0], "vertices")
    return [a for a in arcs if a.length > 1e-14]


def _dumbbell_arcs(spec: DomainSpec) -> list[Arc]:
    theta, sep, w, rho = spec.lobe_aperture, spec.separation, spec.neck_halfwidth, spec.rounding
    if rho <= 0.0:
        raise SpecError("rounding", "dumbbell junctions need a positive rounding radius")
    half = sep / 2.0
    c1 = np.array([-math.sin(half), 0.0, math.cos(half)])
    c2 = np.array([math.sin(half), 0.0, math.cos(half)])
    ratio = math.cos(theta + rho) / math.cos(w + rho)
    delta = math.acos(min(1.0, ratio))
    a1, a2 = -half + delta, half - delta
    if a1 >= a2:
        raise SpecError("neck_halfwidth", "junction fillets overlap; neck too short for this rounding")

    def fillet(alpha: float, side: float) -> np.ndarray:
        return np.array([math.cos(w + rho) * math.sin(alpha), side * math.sin(w + rho), math.cos(w + rho) * math.cos(alpha)])

    def neck_point(alpha: float, side: float) -> np.ndarray:
        return np.array([math.cos(w) * math.sin(alpha), side * math.sin(w), math.cos(w) * math.cos(alpha)])

    frac = theta / (theta + rho)
    f_t2, f_b2, f_t1, f_b1 = fillet(a2, 1.0), fillet(a2, -1.0), fillet(a1, 1.0), fillet(a1, -1.0)
    tt2 = slerp(c2, f_t2, [frac])[0]
    tb2 = slerp(c2, f_b2, [frac])[0]
    tt1 = slerp(c1, f_t1, [frac])[0]
    tb1 = slerp(c1, f_b1, [frac])[0]
    nt2, nb2, nt1, nb1 = neck_point(a2, 1.0), neck_point(a2, -1.0), neck_point(a1, 1.0), neck_point(a1, -1.0)
    e2 = np.array([0.0, 1.0, 0.0])
    arcs = [
        Arc.between(c2, theta, tb2, tt2, 1),
        Arc.between(f_t2, rho, tt2, nt2, -1),
        Arc.between(e2, math.pi / 2 - w, nt2, nt1, -1),
        Arc.between(f_t1, rho, nt1, tt1, -1),
        Arc.between(c1, theta, tt1, tb1, 1),
        Arc.between(f_b1, rho, tb1, nb1, -1),
        Arc.between(-e2, math.pi / 2 - w, nb1, nb2, -1),
        Arc.between(f_b2, rho, nb2, tb2, -1),
    ]
    for arc in (arcs[2], arcs[6]):
        if abs(arc.sweep) > math.pi:
            raise SpecError("neck_halfwidth", "degenerate neck")
    return arcs


def _check_simple(arcs: list[Arc], field: str) -> None:
    pts = np.vstack([a.points(np.linspace(0.0, 1.0, 64, endpoint=False)) for a in arcs])
    loc = PolygonLocator(pts)
    if loc.self_intersects():
        raise SpecError(field, "boundary self-intersects")


def boundary_curve(spec: DomainSpec) -> BoundaryCurve:
    if spec.kind in ("cap", "perturbed_cap"):
        return BoundaryCurve(_cap_raw(spec))
    if spec.kind == "geodesic_polygon":
        return BoundaryCurve(_chain(_polygon_arcs(spec)))
    if spec.kind == "dumbbell":
        arcs = _dumbbell_arcs(spec)
        curve = BoundaryCurve(_chain(arcs))
        if PolygonLocator(curve.dense_points(1024)).self_intersects():
            raise SpecError("neck_halfwidth", "boundary self-intersects")
        return curve
    raise SpecError("kind", f"unknown kind {spec.kind!r}")


class PolygonLocator:
    """Point queries against a closed geodesic polygon (vertices ccw).

    Inside/outside is decided exactly in the gnomonic projection about the
    vertex centroid, where geodesic edges become straight segments. Distances
    are exact point-to-arc distances over the edges incident to the nearest
    ``k`` vertices, which is exact whenever the distance is below a few edge
    lengths and an overestimate otherwise.
    """

    def __init__(self, vertices: np.ndarray, k: int = 24, star_center: np.ndarray | None = None):
        self.v = np.asarray(vertices, dtype=float)
        n = len(self.v)
        self.normals = normalize(np.cross(self.v, np.roll(self.v, -1, axis=0)))
        self.k = min(k, n)
        self._tree = cKDTree(self.v)
        self._max_edge = float(np.max(geodesic_distance(self.v, np.roll(self.v, -1, axis=0))))
        self._star = star_center is not None
        if self._star:
            # polygon star-shaped about star_center with vertices in increasing azimuth
            self.center = normalize(np.asarray(star_center, dtype=float))
            e1, e2 = tangent_frame(self.center)
            self._frame = np.vstack([e1, e2])
            az = np.unwrap(np.arctan2(self.v @ e2, self.v @ e1))
            if np.any(np.diff(az) <= 0.0) or az[-1] - az[0] >= TWO_PI:
                raise ValueError("polygon is not star-shaped about the given center")
            self._az = az
            return
        self.center = normalize(self.v.sum(axis=0))
        if np.min(self.v @ self.center) <= 1e-12:
            raise ValueError("polygon does not fit in an open hemisphere about its centroid")
        e1, e2 = tangent_frame(self.center)
        self._frame = np.vstack([e1, e2])
        self.xy = self._gnomonic(self.v)

    def _gnomonic(self, p: np.ndarray) -> np.ndarray:
        return (p @ self._frame.T) / (p @ self.center)[:, None]

    def contains(self, p: np.ndarray, chunk: int = 4096) -> np.ndarray:
        p = np.atleast_2d(np.asarray(p, dtype=float))
        if self._star:
            return self._contains_star(p)
        front = p @ self.center > 1e-12
        out = np.zeros(len(p), dtype=bool)
        idx = np.flatnonzero(front)
        if len(idx) == 0:
            return out
        xy = self._gnomonic(p[idx])
        x0, y0 = self.xy[:, 0], self.xy[:, 1]
        x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
        dy = y1 - y0
        dy = np.where(dy == 0.0, 1e-300, dy)
        for lo in range(0, len(idx), chunk):
            px = xy[lo : lo + chunk, 0:1]
            py = xy[lo : lo + chunk, 1:2]
            straddle = (y0 > py) != (y1 > py)
            x_cross = x0 + (py - y0) * (x1 - x0) / dy
            hits = np.count_nonzero(straddle & (px < x_cross), axis=1)
            out[idx[lo : lo + chunk]] = hits % 2 == 1
        return out

    def _contains_star(self, p: np.ndarray) -> np.ndarray:
        # inside iff left of the edge that spans the point's azimuth wedge
        az = np.arctan2(p @ self._frame[1], p @ self._frame[0])
        az = self._az[0] + np.mod(az - self._az[0], TWO_PI)
        i = np.searchsorted(self._az, az, side="right") - 1
        side = np.einsum("ij,ij->i", p, self.normals[i])
        return (side > 0.0) & (p @ self.center > -1.0 + 1e-12)

    def distance(self, p: np.ndarray, cutoff: float | None = None) -> np.ndarray:
        """Geodesic distance to the polygon.

        With ``cutoff`` set, points farther than about ``cutoff`` skip the exact
        edge search and get a lower bound that still exceeds ``cutoff``.
        """
        p = np.atleast_2d(np.asarray(p, dtype=float))
        if cutoff is None:
            return self._distance(p)
        d0 = chord_to_angle(self._tree.query(p, k=1)[0])
        # nearest vertex of an edge at distance d lies within d + half the edge
        bound = d0 - 0.5 * self._max_edge
        out = bound.copy()
        near = bound <= cutoff
        if np.any(near):
            out[near] = self._distance(p[near])
        return out

    def _distance(self, p: np.ndarray) -> np.ndarray:
        n = len(self.v)
        _, near = self._tree.query(p, k=self.k)
        near = near.reshape(len(p), -1)
        cand = np.concatenate([near, (near - 1) % n], axis=1)  # edges starting at these indices
        a = self.v[cand]
        b = self.v[(cand + 1) % n]
        nrm = self.normals[cand]
        pp = p[:, None, :]
        s = np.einsum("ijk,ijk->ij", pp, nrm)
        foot = pp - s[..., None] * nrm
        # foot lies on the minor arc iff it is on the inner side of both endpoints
        on_arc = (np.einsum("ijk,ijk->ij", np.cross(a, foot), nrm) >= 0.0) & (
            np.einsum("ijk,ijk->ij", np.cross(foot, b), nrm) >= 0.0
        )
        d_line = np.arcsin(np.clip(np.abs(s), 0.0, 1.0))
        d_end = np.minimum(geodesic_distance(pp, a), geodesic_distance(pp, b))
        d = np.where(on_arc, np.minimum(d_line, d_end), d_end)
        return d.min(axis=1)

    def signed_distance(self, p: np.ndarray, cutoff: float | None = None) -> np.ndarray:
        """Geodesic distance to the polygon, negative inside."""
        d = self.distance(p, cutoff)
        return np.where(self.contains(p), -d, d)

    def self_intersects(self) -> bool:
        """Planar segment intersection test in the gnomonic chart (O(n^2) but vectorized)."""
        if self._star:
            return False
        xy = self.xy
        a, b = xy, np.roll(xy, -1, axis=0)
        n = len(xy)

        def orient(p, q, r):
            return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

        A, B = a[:, None, :], b[:, None, :]
        C, D = a[None, :, :], b[None, :, :]
        d1, d2 = orient(A, B, C), orient(A, B, D)
        d3, d4 = orient(C, D, A), orient(C, D, B)
        cross = (d1 * d2 < 0) & (d3 * d4 < 0)
        i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        adjacent = (np.abs(i - j) <= 1) | (np.abs(i - j) == n - 1)
        return bool(np.any(cross & ~adjacent))


def polyline_tangents(v: np.ndarray) -> np.ndarray:
    """Unit tangents at the vertices of a closed spherical polyline (central differences)."""
    t = np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)
    t = t - np.einsum("ij,ij->i", t, v)[:, None] * v
    return normalize(t)


def arc_length_parameter(v: np.ndarray) -> np.ndarray:
    seg = chord_to_angle(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1))
    cum = np.concatenate([[0.0], np.cumsum(seg)[:-1]])
    return cum / seg.sum()
