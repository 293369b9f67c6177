"""Triangulated spherical domains.

A :class:`TriangulatedDomain` carries the lifted vertices on S^2, the
triangle list, the closed boundary loop, and per-triangle chart data: the
planar projection (x1, x2) in the chart frame, the pulled-back metric tensor
and the spherical area weight.

The metric of triangle T is the pull-back of the flat triangle through the
chart, rescaled conformally so that its area element integrates to the exact
spherical area of T:

    g_T = (A_sph / A_flat) F^T F,   F = J E^{-1},

with J the 3x2 matrix of 3D edge vectors and E the 2x2 matrix of chart edge
vectors. In two dimensions a conformal factor leaves the Dirichlet energy
unchanged, so the stiffness is the flat cotangent stiffness while masses use
the spherical areas.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..sphere import geodesic_distance, spherical_triangle_area
from .specs import DomainSpec


class MeshError(ValueError):
    """Raised for meshes that are not valid 2-manifolds with boundary."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def edge_counts(triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unique undirected edges (sorted pairs) and the number of incident triangles."""
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0, return_counts=True)


@dataclass(frozen=True, eq=False)
class TriangulatedDomain:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    eta: float | None = None
    spec: DomainSpec | None = None
    boundary_param: np.ndarray | None = None
    chart_frame: np.ndarray = field(default_factory=lambda: np.eye(3))

    chart: np.ndarray = field(init=False)
    metric: np.ndarray = field(init=False)
    area_weights: np.ndarray = field(init=False)
    h: float = field(init=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        t = np.asarray(self.triangles, dtype=np.int64)
        b = np.asarray(self.boundary, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3 or t.ndim != 2 or t.shape[1] != 3:
            raise MeshError("vertices must be (n, 3) and triangles (m, 3)")
        if len(b) < 3:
            raise MeshError("boundary loop needs at least 3 vertices")
        if t.min() < 0 or t.max() >= len(v) or b.min() < 0 or b.max() >= len(v):
            raise MeshError("index out of range")
        if np.max(np.abs(np.linalg.norm(v, axis=1) - 1.0)) > 1e-12:
            raise MeshError("vertices must lie on the unit sphere")
        check_manifold(t, b, len(v))
        if self.eta is not None and np.min(v[:, 2]) <= self.eta:
            raise MeshError(f"vertex with x3 = {np.min(v[:, 2]):.6g} <= eta = {self.eta}")
        frame = np.asarray(self.chart_frame, dtype=float)
        chart = v @ frame[:2].T
        p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        q0, q1, q2 = chart[t[:, 0]], chart[t[:, 1]], chart[t[:, 2]]
        J = np.stack([p1 - p0, p2 - p0], axis=2)  # (m, 3, 2)
        E = np.stack([q1 - q0, q2 - q0], axis=2)  # (m, 2, 2)
        flat_area = 0.5 * np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=1)
        sph_area = spherical_triangle_area(p0, p1, p2)
        with np.errstate(divide="ignore", invalid="ignore"):
            F = J @ np.linalg.inv(E)
            metric = (sph_area / flat_area)[:, None, None] * np.einsum("mki,mkj->mij", F, F)
        edges, _ = edge_counts(t)
        h = float(np.max(geodesic_distance(v[edges[:, 0]], v[edges[:, 1]])))
        for name, val in (
            ("vertices", v),
            ("triangles", t),
            ("boundary", b),
            ("chart_frame", frame),
            ("chart", chart),
            ("metric", metric),
            ("area_weights", sph_area),
        ):
            object.__setattr__(self, name, _readonly(val))
        if self.boundary_param is not None:
            object.__setattr__(self, "boundary_param", _readonly(np.asarray(self.boundary_param, dtype=float)))
        object.__setattr__(self, "h", h)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def metric_det(self) -> np.ndarray:
        g = self.metric
        return g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] * g[:, 1, 0]

    @property
    def boundary_points(self) -> np.ndarray:
        return self.vertices[self.boundary]

    def vertex_weights(self) -> np.ndarray:
        """Row sums of the P1 mass matrix (one third of incident triangle areas)."""
        w = np.zeros(self.n_vertices)
        np.add.at(w, self.triangles.ravel(), np.repeat(self.area_weights / 3.0, 3))
        return w

    # -- transformations ------------------------------------------------------

    def rotated(self, R: np.ndarray) -> "TriangulatedDomain":
        """Apply the rotation ``R`` to all vertices; the chart frame moves along."""
        R = np.asarray(R, dtype=float)
        v = self.vertices @ R.T
        v = v / np.linalg.norm(v, axis=1, keepdims=True)
        return TriangulatedDomain(
            v,
            self.triangles,
            self.boundary,
            eta=None,
            spec=None,
            boundary_param=self.boundary_param,
            chart_frame=self.chart_frame @ R.T,
        )

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
            "boundary": self.boundary.tolist(),
        }
        if self.eta is not None:
            out["eta"] = self.eta
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "TriangulatedDomain":
        try:
            v = np.asarray(data["vertices"], dtype=float)
            t = np.asarray(data["triangles"], dtype=np.int64)
            b = np.asarray(data["boundary"], dtype=np.int64)
        except (KeyError, TypeError, ValueError) as exc:
            raise MeshError(f"malformed mesh data: {exc}") from exc
        return cls(v, t, b, eta=data.get("eta"))

    @classmethod
    def from_json(cls, text: str) -> "TriangulatedDomain":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MeshError(f"malformed mesh JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise MeshError("mesh JSON must be an object")
        return cls.from_dict(data)


def check_manifold(triangles: np.ndarray, boundary: np.ndarray, n_vertices: int) -> None:
    """Interior edges shared by two triangles, boundary-loop edges by one, all oriented."""
    edges, counts = edge_counts(triangles)
    if np.any(counts > 2):
        raise MeshError("edge shared by more than two triangles")
    b_edges = np.sort(np.column_stack([boundary, np.roll(boundary, -1)]), axis=1)
    b_set = {tuple(e) for e in b_edges.tolist()}
    single = {tuple(e) for e in edges[counts == 1].tolist()}
    if single != b_set:
        raise MeshError(
            f"boundary loop does not match the single-triangle edges "
            f"({len(single ^ b_set)} mismatched edges)"
        )
    used = np.zeros(n_vertices, dtype=bool)
    used[triangles.ravel()] = True
    if not used.all():
        raise MeshError(f"{np.count_nonzero(~used)} vertices belong to no triangle")
    # consistent orientation: each directed edge appears at most once
    directed = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    _, dcounts = np.unique(directed, axis=0, return_counts=True)
    if np.any(dcounts > 1):
        raise MeshError("inconsistent triangle orientation")


def orient_outward(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Reorder triangles to be counterclockwise seen from outside the sphere."""
    p0, p1, p2 = (vertices[triangles[:, k]] for k in range(3))
    s = np.einsum("ij,ij->i", np.cross(p1 - p0, p2 - p0), p0 + p1 + p2)
    t = triangles.copy()
    flip = s < 0
    t[flip] = t[flip][:, [0, 2, 1]]
    return t


def mesh_quality(mesh: TriangulatedDomain) -> dict:
    """Minimum interior angle (degrees) and edge-length spread of the lifted triangles."""
    v, t = mesh.vertices, mesh.triangles
    p = [v[t[:, k]] for k in range(3)]
    angles = []
    for k in range(3):
        a = p[(k + 1) % 3] - p[k]
        b = p[(k + 2) % 3] - p[k]
        cosang = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        angles.append(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
    edges, _ = edge_counts(t)
    lengths = geodesic_distance(v[edges[:, 0]], v[edges[:, 1]])
    return {
        "min_angle": float(np.min(angles)),
        "h": mesh.h,
        "h_min": float(lengths.min()),
        "n_vertices": mesh.n_vertices,
        "n_triangles": mesh.n_triangles,
    }


def boundary_arclength(mesh: TriangulatedDomain) -> np.ndarray:
    """Arc-length parameter in [0, 1) of each boundary vertex along the loop."""
    pts = mesh.boundary_points
    seg = geodesic_distance(pts, np.roll(pts, -1, axis=0))
    cum = np.concatenate([[0.0], np.cumsum(seg)[:-1]])
    return cum / seg.sum()


def total_boundary_length(mesh: TriangulatedDomain) -> float:
    pts = mesh.boundary_points
    return float(np.sum(geodesic_distance(pts, np.roll(pts, -1, axis=0))))
