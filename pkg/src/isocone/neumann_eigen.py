"""Laplace-Beltrami Neumann eigenvalues on triangulated spherical domains.

Conventions
-----------
``mu1`` is the ratio scale: the infimum of ||grad u|| / ||u|| over zero-mean
u, i.e. the square root of the first nonzero eigenvalue lambda_1 of the
generalized problem K v = lambda M v. Thresholds such as sqrt(N - 1) = sqrt(2)
are compared against ``mu1``, never against ``lambda``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .spherical_domain import DomainSpec, SpecError, TriangulatedDomain, hausdorff_boundary_distance
from .spherical_domain.meshing import map_mesh, triangulate

_REF_GRAD = np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])


class AssemblyError(ValueError):
    """A triangle with a non-positive (or non-finite) metric determinant."""

    def __init__(self, index: int, det: float):
        super().__init__(f"triangle {index}: metric determinant {det:.3g} is not positive")
        self.index = index
        self.det = det


class EigenSolverError(RuntimeError):
    """The eigensolver did not reach its tolerance; carries the last residual."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True, eq=False)
class FemSystem:
    """P1 stiffness and mass matrices of a mesh (CSR, symmetric)."""

    K: sp.csr_matrix
    M: sp.csr_matrix
    mesh: TriangulatedDomain
    mass_ones: np.ndarray = field(init=False)
    area: float = field(init=False)

    def __post_init__(self):
        m1 = np.asarray(self.M.sum(axis=1)).ravel()
        object.__setattr__(self, "mass_ones", m1)
        object.__setattr__(self, "area", float(m1.sum()))

    @property
    def n(self) -> int:
        return self.K.shape[0]

    def mean(self, u: np.ndarray) -> float:
        return float(self.mass_ones @ u) / self.area

    def center(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u, dtype=float) - self.mean(u)

    def l2_norm(self, u: np.ndarray) -> float:
        return math.sqrt(max(float(u @ (self.M @ u)), 0.0))

    def grad_norm(self, u: np.ndarray) -> float:
        return math.sqrt(max(float(u @ (self.K @ u)), 0.0))


def element_stiffness(mesh: TriangulatedDomain) -> np.ndarray:
    """Per-triangle 3x3 stiffness blocks A_chart Dphi^T g^{-1} Dphi sqrt(det g).

    Raises :class:`AssemblyError` naming the first triangle whose metric
    determinant is not positive.
    """
    g = mesh.metric
    det = mesh.metric_det
    bad = np.flatnonzero(~(np.isfinite(det) & (det > 0.0)))
    if len(bad):
        raise AssemblyError(int(bad[0]), float(det[bad[0]]))
    q = mesh.chart[mesh.triangles]  # (m, 3, 2)
    E = np.stack([q[:, 1] - q[:, 0], q[:, 2] - q[:, 0]], axis=2)  # columns are edge vectors
    chart_area = 0.5 * np.abs(np.linalg.det(E))
    dphi = np.linalg.solve(np.transpose(E, (0, 2, 1)), np.broadcast_to(_REF_GRAD, (len(E), 2, 3)))
    ginv = np.linalg.inv(g)
    Ke = (chart_area * np.sqrt(det))[:, None, None] * np.einsum("mai,mab,mbj->mij", dphi, ginv, dphi)
    # rows of an exact element matrix sum to zero; enforce it against chart round-off
    Ke = 0.5 * (Ke + np.transpose(Ke, (0, 2, 1)))
    idx = np.arange(3)
    Ke[:, idx, idx] = 0.0
    Ke[:, idx, idx] = -Ke.sum(axis=2)
    return Ke


def element_mass(mesh: TriangulatedDomain) -> np.ndarray:
    """Per-triangle consistent P1 mass blocks, scaled by the spherical area."""
    base = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return mesh.area_weights[:, None, None] * base[None, :, :]


def _scatter(mesh: TriangulatedDomain, blocks: np.ndarray) -> sp.csr_matrix:
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    A = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(mesh.n_vertices,) * 2).tocsr()
    A.sum_duplicates()
    return ((A + A.T) * 0.5).tocsr()


def assemble(mesh: TriangulatedDomain) -> FemSystem:
    """Assemble the P1 stiffness K and mass M of ``mesh``."""
    return FemSystem(_scatter(mesh, element_stiffness(mesh)), _scatter(mesh, element_mass(mesh)), mesh)


@dataclass(frozen=True, eq=False)
class EigenResult:
    mu1: float
    lam: float
    eigenvector: np.ndarray
    residual: float
    h: float
    iterations: int
    n_vertices: int

    def to_dict(self) -> dict:
        return {
            "mu1": self.mu1,
            "lambda1": self.lam,
            "residual": self.residual,
            "h": self.h,
            "iterations": self.iterations,
            "n_vertices": self.n_vertices,
        }


def _ritz(K, M, X):
    Kr = X.T @ (K @ X)
    Mr = X.T @ (M @ X)
    Kr = 0.5 * (Kr + Kr.T)
    Mr = 0.5 * (Mr + Mr.T)
    w, V = scipy.linalg.eigh(Kr, Mr)
    return w, X @ V


def mu1(
    mesh_or_system: TriangulatedDomain | FemSystem,
    block: int = 6,
    shift: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 10000,
    seed: int = 0,
) -> EigenResult:
    """First nonzero Neumann eigenvalue on the ratio scale, mu1 = sqrt(lambda_1).

    Shift-invert block subspace iteration with the operator (K + shift M)^{-1} M.
    Every iterate is made M-orthogonal to the constants, which removes the
    zero eigenvalue without pinning a vertex. Iteration stops once the
    relative change of lambda_1 is below ``tol`` and the relative residual
    ||K v - lambda M v|| / ||lambda M v|| is below 1e-10 (or stagnates below
    1e-8).
    """
    system = mesh_or_system if isinstance(mesh_or_system, FemSystem) else assemble(mesh_or_system)
    K, M = system.K, system.M
    n = system.n
    if n < 8:
        raise ValueError(f"need at least 8 vertices, got {n}")
    block = min(block, n - 2)
    m1 = system.mass_ones
    total = system.area
    lu = splu((K + shift * M).tocsc())

    def deflate(X):
        return X - np.outer(np.ones(n), (m1 @ X) / total)

    X = deflate(np.random.default_rng(seed).standard_normal((n, block)))
    lam_old = np.inf
    residual = np.inf
    best = np.inf
    stall = 0
    for it in range(1, max_iter + 1):
        X = deflate(lu.solve(M @ X))
        X, _ = np.linalg.qr(X)
        w, X = _ritz(K, M, X)
        lam = float(w[0])
        v = X[:, 0]
        Mv = M @ v
        residual = float(np.linalg.norm(K @ v - lam * Mv) / np.linalg.norm(lam * Mv))
        change = abs(lam - lam_old) / abs(lam)
        lam_old = lam
        if residual < best * 0.9:
            best, stall = residual, 0
        else:
            stall += 1
        if change < tol and (residual < 1e-10 or (residual < 1e-8 and stall >= 5)):
            break
    else:
        raise EigenSolverError("shift-invert iteration did not converge", residual, max_iter)
    v = deflate(v[:, None])[:, 0]
    v = v / math.sqrt(float(v @ (M @ v)))
    k = int(np.argmax(np.abs(v)))
    if v[k] < 0:
        v = -v
    v.setflags(write=False)
    return EigenResult(
        mu1=math.sqrt(lam),
        lam=lam,
        eigenvector=v,
        residual=residual,
        h=system.mesh.h,
        iterations=it,
        n_vertices=n,
    )


def dense_spectrum(system: FemSystem) -> np.ndarray:
    """All generalized eigenvalues of (K, M) by a dense solver (small meshes only)."""
    return scipy.linalg.eigh(system.K.toarray(), system.M.toarray(), eigvals_only=True)


def rayleigh_quotient(system: FemSystem, u: np.ndarray) -> float:
    """sqrt(u~^T K u~ / u~^T M u~) with u~ the M-mean-free part of ``u``."""
    u = np.asarray(u, dtype=float)
    ut = system.center(u)
    den = float(ut @ (system.M @ ut))
    scale = float(u @ (system.M @ u))
    if den <= 1e-28 * max(scale, 1e-300) or den == 0.0:
        raise ValueError("constant input: the mean-free part vanishes")
    return math.sqrt(max(float(ut @ (system.K @ ut)), 0.0) / den)


def poincare_residual(system: FemSystem, u: np.ndarray, c1: float) -> float:
    """||grad u|| / c1 - ||u - mean(u)||; nonnegative when the inequality holds."""
    if c1 <= 0.0:
        raise ValueError("c1 must be positive")
    ut = system.center(np.asarray(u, dtype=float))
    return system.grad_norm(ut) / c1 - system.l2_norm(ut)


# -- stability of mu1 under boundary perturbation ------------------------------

SWEEP_HEADER = ("epsilon", "hausdorff", "mu1_base", "mu1_pert", "delta_mu1", "h")


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    hausdorff: float
    mu1_base: float
    mu1_pert: float
    delta_mu1: float
    h: float

    def as_tuple(self) -> tuple:
        return (self.epsilon, self.hausdorff, self.mu1_base, self.mu1_pert, self.delta_mu1, self.h)


def perturbed_spec(base: DomainSpec, epsilon: float, family: str = "concentric", mode: int = 3) -> DomainSpec:
    """Perturbation of a cap at boundary Hausdorff distance about ``epsilon``.

    ``concentric`` widens the aperture by epsilon; ``mode`` adds the Fourier
    term epsilon cos(mode phi) to the boundary colatitude.
    """
    if base.kind not in ("cap", "perturbed_cap"):
        raise SpecError("kind", f"stability sweeps need a cap or perturbed cap, got {base.kind}")
    if family == "concentric":
        return DomainSpec.perturbed_cap(base.aperture + epsilon, base.modes, center=base.center, eta=base.eta)
    if family == "mode":
        modes = tuple(base.modes) + ((mode, epsilon, 0.0),)
        return DomainSpec.perturbed_cap(base.aperture, modes, center=base.center, eta=base.eta)
    raise SpecError("family", f"unknown perturbation family {family!r}; expected 'concentric' or 'mode'")


def stability_sweep(
    base: DomainSpec,
    perturbation_sizes: Iterable[float],
    h: float,
    family: str = "concentric",
    mode: int = 3,
) -> list[SweepRow]:
    """|mu1(A') - mu1(A)| for perturbations A' of a cap A, sorted by epsilon.

    The perturbed meshes are the base mesh moved radially onto the new
    boundary, so both eigenvalues come from meshes with identical
    connectivity and the difference is not swamped by meshing noise.
    """
    base_mesh = triangulate(base, h)
    base_mu = mu1(base_mesh).mu1
    rows = []
    for eps in sorted(float(e) for e in perturbation_sizes):
        if eps == 0.0:
            pert_mesh, pert_mu = base_mesh, base_mu
        else:
            pert_mesh = map_mesh(base_mesh, perturbed_spec(base, eps, family, mode))
            pert_mu = mu1(pert_mesh).mu1
        rows.append(
            SweepRow(
                epsilon=eps,
                hausdorff=hausdorff_boundary_distance(base_mesh, pert_mesh),
                mu1_base=base_mu,
                mu1_pert=pert_mu,
                delta_mu1=abs(pert_mu - base_mu),
                h=base_mesh.h,
            )
        )
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for row in rows:
        writer.writerow([repr(float(x)) for x in row.as_tuple()])
    return buf.getvalue()


def estimate_c1(specimens: Iterable[TriangulatedDomain | DomainSpec], h: float = 0.05, margin: float = 0.005) -> float:
    """Empirical Poincare constant: smallest mu1 over convex specimens minus ``margin``."""
    values = []
    for s in specimens:
        mesh = triangulate(s, h) if isinstance(s, DomainSpec) else s
        values.append(mu1(mesh).mu1)
    if not values:
        raise ValueError("need at least one specimen")
    return min(values) - margin


def coo_text(A: sp.spmatrix) -> str:
    """Coordinate-format dump, one 'row col value' line per stored entry."""
    C = sp.coo_matrix(A)
    order = np.lexsort((C.col, C.row))
    return "".join(f"{C.row[k]} {C.col[k]} {float(C.data[k])!r}\n" for k in order)
