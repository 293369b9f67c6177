"""Perimeter and volume of radial graphs over spherical domains.

A vertex vector u on a mesh of A describes the star-shaped set

    E = { t xi : xi in A, 0 < t < 1 + u(xi) },

whose relative perimeter inside the cone over A and whose volume are

    P(u) = int_A (1+u)^{N-2} sqrt((1+u)^2 + |grad u|^2),
    V(u) = (1/N) int_A (1+u)^N.

Both integrals use the same rule: u is interpolated linearly, |grad u|^2 is
constant per triangle, and three interior points per triangle (barycentric
(2/3, 1/6, 1/6) and permutations, weight area/3) integrate the rest. The
integrands are homogeneous in (1+u), so a radial scaling s(1+u) multiplies P
by s^{N-1} and V by s^N exactly, also in floating point up to rounding.
"""

from __future__ import annotations

import json
import math
import weakref
from dataclasses import dataclass, field

import numpy as np

from .neumann_eigen import FemSystem, assemble, element_stiffness
from .sphere import DIM
from .spherical_domain import TriangulatedDomain

QUAD_BARY = np.array(
    [
        [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
        [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
        [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
    ]
)


class GraphDomainError(ValueError):
    """u <= -1 somewhere: the graph does not meet every ray of the cone."""


class HypothesisError(ValueError):
    """A precondition of the small-perturbation lower bound is violated.

    ``hypothesis`` is ``"hyp-1"`` (sup-norm smallness of u or grad u) or
    ``"volume normalization"``.
    """

    def __init__(self, hypothesis: str, message: str):
        super().__init__(f"{hypothesis}: {message}")
        self.hypothesis = hypothesis


class _MeshData:
    """Per-mesh arrays shared by all graphs on the same mesh."""

    def __init__(self, mesh: TriangulatedDomain):
        self.system: FemSystem = assemble(mesh)
        self.Ke = element_stiffness(mesh)
        self.tri = mesh.triangles
        self.area = mesh.area_weights
        self.qw = self.area / 3.0  # weight of each quadrature point


_CACHE: "weakref.WeakKeyDictionary[TriangulatedDomain, _MeshData]" = weakref.WeakKeyDictionary()


def mesh_data(mesh: TriangulatedDomain) -> _MeshData:
    data = _CACHE.get(mesh)
    if data is None:
        data = _MeshData(mesh)
        _CACHE[mesh] = data
    return data


def fem_system(mesh: TriangulatedDomain) -> FemSystem:
    return mesh_data(mesh).system


@dataclass(frozen=True, eq=False)
class RadialGraph:
    """Radial offset u on the vertices of ``mesh``; the surface point over xi is (1+u) xi."""

    mesh: TriangulatedDomain
    u: np.ndarray
    sup_norm: float = field(init=False)
    grad_sup_norm: float = field(init=False)

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        if u.shape != (self.mesh.n_vertices,):
            raise ValueError(f"u must have one value per vertex ({self.mesh.n_vertices}), got shape {u.shape}")
        if not np.all(np.isfinite(u)):
            raise GraphDomainError("u contains non-finite values")
        if np.min(u) <= -1.0:
            raise GraphDomainError(f"u must exceed -1 everywhere, min is {np.min(u):.6g}")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "sup_norm", float(np.max(np.abs(u))))
        object.__setattr__(self, "grad_sup_norm", float(np.sqrt(np.max(triangle_grad_sq(self.mesh, u)))))

    def with_u(self, u: np.ndarray) -> "RadialGraph":
        return RadialGraph(self.mesh, u)

    def to_dict(self) -> dict:
        return {"u": self.u.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str, mesh: TriangulatedDomain) -> "RadialGraph":
        try:
            data = json.loads(text)
            u = data["u"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValueError(f"malformed graph JSON: {exc}") from exc
        return cls(mesh, np.asarray(u, dtype=float))


@dataclass(frozen=True)
class Lemma1Params:
    delta: float
    epsilon: float
    N: int = DIM

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.N != DIM:
            raise ValueError(f"only N = {DIM} is implemented")


def triangle_grad_sq(mesh: TriangulatedDomain, u: np.ndarray) -> np.ndarray:
    """|grad u|^2 per triangle in the spherical metric, u_T^T K_T u_T / area_T."""
    d = mesh_data(mesh)
    uT = np.asarray(u)[d.tri]
    return np.maximum(np.einsum("mi,mij,mj->m", uT, d.Ke, uT), 0.0) / d.area


def _quad_values(mesh: TriangulatedDomain, u: np.ndarray) -> np.ndarray:
    d = mesh_data(mesh)
    return 1.0 + np.asarray(u)[d.tri] @ QUAD_BARY.T  # (m, 3): 1+u at the quadrature points


def perimeter(g: RadialGraph) -> float:
    """Relative perimeter of the set below the graph inside the cone."""
    d = mesh_data(g.mesh)
    v = _quad_values(g.mesh, g.u)
    G = triangle_grad_sq(g.mesh, g.u)[:, None]
    f = v ** (DIM - 2) * np.sqrt(v * v + G)
    return float(np.sum(d.qw[:, None] * f))


def volume(g: RadialGraph) -> float:
    """Volume of the set below the graph, (1/N) int (1+u)^N."""
    d = mesh_data(g.mesh)
    v = _quad_values(g.mesh, g.u)
    return float(np.sum(d.qw[:, None] * v**DIM)) / DIM


def mean(g: RadialGraph) -> float:
    """Area-weighted mean of u (mass-matrix weights)."""
    return fem_system(g.mesh).mean(g.u)


def l2_norms(g: RadialGraph) -> tuple[float, float]:
    """Discrete (||u||_{L2}, ||grad u||_{L2}) from the mass and stiffness matrices."""
    s = fem_system(g.mesh)
    return s.l2_norm(g.u), s.grad_norm(g.u)


def _scatter(mesh: TriangulatedDomain, per_corner: np.ndarray) -> np.ndarray:
    out = np.zeros(mesh.n_vertices)
    np.add.at(out, mesh_data(mesh).tri.ravel(), per_corner.ravel())
    return out


def perimeter_gradient(g: RadialGraph) -> np.ndarray:
    """Exact derivative of :func:`perimeter` with respect to the vertex values of u."""
    d = mesh_data(g.mesh)
    uT = g.u[d.tri]
    v = 1.0 + uT @ QUAD_BARY.T
    G = triangle_grad_sq(g.mesh, g.u)[:, None]
    root = np.sqrt(v * v + G)
    n = DIM
    # f = v^{n-2} root; df/dv and df/dG
    f_v = (n - 2) * v ** (n - 3) * root + v ** (n - 1) / root
    f_G = 0.5 * v ** (n - 2) / root
    w = d.qw[:, None]
    corner = (w * f_v) @ QUAD_BARY  # sum_q w f_v(q) phi_i(q)
    dG = 2.0 * np.einsum("mij,mj->mi", d.Ke, uT) / d.area[:, None]
    corner += np.sum(w * f_G, axis=1)[:, None] * dG
    return _scatter(g.mesh, corner)


def volume_gradient(g: RadialGraph) -> np.ndarray:
    d = mesh_data(g.mesh)
    v = _quad_values(g.mesh, g.u)
    corner = (d.qw[:, None] * v ** (DIM - 1)) @ QUAD_BARY
    return _scatter(g.mesh, corner)


def lemma1_bound(g: RadialGraph, p: Lemma1Params) -> float:
    """Small-perturbation lower bound for the perimeter of a normalized graph.

    Returns  H(A) + (1-delta)/2 (||grad u||^2 - (N-1)||u||^2) - delta/2 ||u||^2
    with discrete L2 norms. Requires ||u||_inf < epsilon, ||grad u||_inf <
    epsilon and volume = H(A)/N to relative 1e-8; raises
    :class:`HypothesisError` otherwise.
    """
    if not g.sup_norm < p.epsilon:
        raise HypothesisError("hyp-1", f"||u||_inf = {g.sup_norm:.6g} is not below epsilon = {p.epsilon}")
    if not g.grad_sup_norm < p.epsilon:
        raise HypothesisError(
            "hyp-1", f"||grad u||_inf = {g.grad_sup_norm:.6g} is not below epsilon = {p.epsilon}"
        )
    area = float(np.sum(g.mesh.area_weights))
    target = area / p.N
    vol = volume(g)
    if abs(vol - target) > 1e-8 * target:
        raise HypothesisError(
            "volume normalization", f"volume {vol:.12g} differs from area/N = {target:.12g}"
        )
    u2, gu = l2_norms(g)
    u2 = u2 * u2
    g2 = gu * gu
    return area + 0.5 * (1.0 - p.delta) * (g2 - (p.N - 1) * u2) - 0.5 * p.delta * u2


def barycenter_bound(g: RadialGraph, C: float = 4.0) -> tuple[float, float]:
    """(|mean u|, C eps / ((1 - C eps) sqrt(H(A))) ||u - mean u||) with eps = ||u||_inf.

    The first entry is at most the second for volume-normalized graphs.
    """
    s = fem_system(g.mesh)
    eps = g.sup_norm
    if C * eps >= 1.0:
        raise HypothesisError("hyp-1", f"C * ||u||_inf = {C * eps:.3g} must be below 1")
    ubar = s.mean(g.u)
    spread = s.l2_norm(g.u - ubar)
    return abs(ubar), C * eps / ((1.0 - C * eps) * math.sqrt(s.area)) * spread


# -- random test fields ---------------------------------------------------------


def random_smooth_field(
    points: np.ndarray, rng: np.random.Generator, n_waves: int = 6, max_freq: float = 4.0
) -> np.ndarray:
    """Sum of random plane waves cos(k.x + phase) evaluated at ``points``, sup-normalized."""
    points = np.asarray(points, dtype=float)
    dirs = rng.standard_normal((n_waves, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    k = dirs * rng.uniform(0.5, max_freq, size=(n_waves, 1))
    phase = rng.uniform(0.0, 2.0 * math.pi, size=n_waves)
    amp = rng.standard_normal(n_waves)
    f = np.cos(points @ k.T + phase) @ amp
    peak = np.max(np.abs(f))
    return f / peak if peak > 0 else f


# -- elementary inequalities ----------------------------------------------------

EQ_POLY1_C = 2.0
EQ_POLY2_C = 4.0
TK_RANGE = (-2.0, 10.0)
SQRT_RANGE = (0.0, 10.0)
_ULP = 8.0 * np.finfo(float).eps


def _violations(lhs: np.ndarray, rhs: np.ndarray) -> tuple[int, float]:
    """Count of lhs <= rhs failures beyond rounding, and the smallest rhs - lhs."""
    slack = _ULP * np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), 1.0)
    margin = rhs - lhs
    return int(np.count_nonzero(margin < -slack)), float(np.min(margin))


def verify_elementary_inequalities(n_samples: int, seed: int = 0) -> dict:
    """Sample the scalar inequalities behind the small-perturbation bound (N = 3).

    * power: (1+t)^k >= 1 - k|t| for k = 0..6, t uniform on [-2, 10]
    * sqrt_bracket: 1 + t/2 - t^2/8 <= sqrt(1+t) <= 1 + t/2, t uniform on [0, 10]
    * cubic_remainder: |(1+t)^2 - (2/3)((1+t)^3 - 1) - (1 - t^2)| <= C|t|^3, C = 2, |t| < 1
    * quadratic_remainder: |(1+t)^3 - 1 - 3t| <= C t^2, C = 4, |t| < 1

    Returns ``{name: {"samples", "failures", "worst_margin", "range"}}``;
    a failure is a violation larger than a few ulps of the operands.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = np.random.default_rng(seed)
    n = DIM
    report = {}

    t = rng.uniform(*TK_RANGE, size=n_samples)
    t[0] = 0.0
    fails, worst = 0, math.inf
    for k in range(7):
        f, m = _violations(1.0 - k * np.abs(t), (1.0 + t) ** k)
        fails += f
        worst = min(worst, m)
    report["power"] = {"samples": n_samples, "failures": fails, "worst_margin": worst, "range": list(TK_RANGE)}

    t = rng.uniform(*SQRT_RANGE, size=n_samples)
    t[0] = 0.0
    root = np.sqrt(1.0 + t)
    f1, m1 = _violations(1.0 + t / 2.0 - t * t / 8.0, root)
    f2, m2 = _violations(root, 1.0 + t / 2.0)
    report["sqrt_bracket"] = {
        "samples": n_samples,
        "failures": f1 + f2,
        "worst_margin": min(m1, m2),
        "range": list(SQRT_RANGE),
    }

    t = rng.uniform(-1.0, 1.0, size=n_samples)
    t[0] = 0.0
    mid = (1.0 + t) ** (n - 1) - (n - 1) / n * ((1.0 + t) ** n - 1.0)
    quad = 1.0 - 0.5 * (n - 1) * t * t
    cubic = EQ_POLY1_C * np.abs(t) ** 3
    f1, m1 = _violations(quad - cubic, mid)
    f2, m2 = _violations(mid, quad + cubic)
    report["cubic_remainder"] = {
        "samples": n_samples,
        "failures": f1 + f2,
        "worst_margin": min(m1, m2),
        "range": [-1.0, 1.0],
        "C": EQ_POLY1_C,
    }

    t = rng.uniform(-1.0, 1.0, size=n_samples)
    t[0] = 0.0
    f, m = _violations(np.abs((1.0 + t) ** n - 1.0 - n * t), EQ_POLY2_C * t * t)
    report["quadratic_remainder"] = {
        "samples": n_samples,
        "failures": f,
        "worst_margin": m,
        "range": [-1.0, 1.0],
        "C": EQ_POLY2_C,
    }
    return report
