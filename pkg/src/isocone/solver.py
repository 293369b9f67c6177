"""Volume-constrained perimeter minimization over radial graphs.

The constraint is handled exactly by radial scaling: for any u the graph
s(1+u) - 1 with s = (target / V(u))^{1/N} has volume ``target`` (both
functionals are homogeneous at the quadrature level). Minimizing u -> P of the
projected graph is then unconstrained, and its gradient at a feasible u is

    grad P - (N-1)/N * P/V * grad V.

Steps use that gradient preconditioned by the discrete H^1 inner product
(K + M), which keeps the step size independent of the mesh resolution.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse.linalg import splu

from .perimeter import (
    RadialGraph,
    fem_system,
    perimeter,
    perimeter_gradient,
    random_smooth_field,
    volume,
    volume_gradient,
)
from .sphere import DIM
from .spherical_domain import DomainSpec, SpecError, TriangulatedDomain, area, triangulate


class VolumeProjectionError(ValueError):
    """Radial scaling cannot reach the requested volume."""


@dataclass(frozen=True)
class SolverOptions:
    step: float = 0.1
    max_iter: int = 2000
    grad_tol: float = 1e-7
    volume_tol: float = 1e-12
    backtrack: float = 0.5
    max_backtracks: int = 40
    armijo: float = 1e-4
    growth: float = 2.0
    max_step: float = 1e3
    sector_tol: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        for name in ("step", "grad_tol", "volume_tol", "armijo", "max_step", "sector_tol"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 < self.backtrack < 1.0:
            raise ValueError(f"backtrack must lie in (0, 1), got {self.backtrack}")
        if self.max_iter < 0 or self.max_backtracks < 1:
            raise ValueError("max_iter must be >= 0 and max_backtracks >= 1")
        if self.growth < 1.0:
            raise ValueError(f"growth must be >= 1, got {self.growth}")


@dataclass(frozen=True, eq=False)
class SolverResult:
    graph: RadialGraph
    iterations: int
    history: list = field(repr=False)  # (perimeter, volume, grad_norm) per iterate
    sector_deficit: float
    converged: bool
    is_sector: bool
    spread: float  # ||u - mean u||_inf of the volume-normalized final graph
    message: str
    target: float

    def to_dict(self, include_u: bool = False) -> dict:
        out = {
            "iterations": self.iterations,
            "converged": self.converged,
            "is_sector": self.is_sector,
            "sector_deficit": self.sector_deficit,
            "spread": self.spread,
            "final_perimeter": self.history[-1][0],
            "final_volume": self.history[-1][1],
            "final_grad_norm": self.history[-1][2],
            "target_volume": self.target,
            "message": self.message,
        }
        if include_u:
            out["u"] = self.graph.u.tolist()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(include_u=True))

    def history_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "perimeter", "volume", "grad_norm"])
        for k, (p, v, gn) in enumerate(self.history):
            w.writerow([k, repr(float(p)), repr(float(v)), repr(float(gn))])
        return buf.getvalue()


def project_volume(g: RadialGraph, target: float) -> RadialGraph:
    """Radially rescale the graph so that its volume equals ``target``."""
    if not target > 0.0:
        raise VolumeProjectionError(f"target volume must be positive, got {target}")
    vol = volume(g)
    if not vol > 0.0:
        raise VolumeProjectionError(f"graph volume {vol} is not positive")
    s = (target / vol) ** (1.0 / DIM)
    return g.with_u(s * (1.0 + g.u) - 1.0)


def sector_deficit(mesh: TriangulatedDomain, g: RadialGraph) -> float:
    """Perimeter at volume area/N minus area; zero for the unit sector."""
    a = area(mesh)
    return perimeter(project_volume(g, a / DIM)) - a


def _spread(g: RadialGraph) -> float:
    s = fem_system(g.mesh)
    return float(np.max(np.abs(g.u - s.mean(g.u))))


class _Preconditioner:
    def __init__(self, mesh: TriangulatedDomain):
        s = fem_system(mesh)
        self._lu = splu((s.K + s.M).tocsc())

    def __call__(self, g: np.ndarray) -> np.ndarray:
        return self._lu.solve(g)


def projected_gradient(g: RadialGraph) -> np.ndarray:
    """Gradient of u -> P(project_volume(u)) at a volume-feasible u."""
    p, v = perimeter(g), volume(g)
    return perimeter_gradient(g) - (DIM - 1) / DIM * p / v * volume_gradient(g)


def minimize(
    mesh: TriangulatedDomain,
    u0: RadialGraph | np.ndarray,
    target: float,
    opts: SolverOptions | None = None,
) -> SolverResult:
    """Projected, H^1-preconditioned gradient descent with Armijo backtracking.

    Every accepted step lowers the perimeter of the volume-projected graph.
    Stops when the preconditioned gradient norm sqrt(g^T (K+M)^{-1} g) drops
    below ``opts.grad_tol``; if backtracking is exhausted first the result is
    returned with ``converged=False`` and a diagnostic message.
    """
    opts = opts or SolverOptions()
    g = u0 if isinstance(u0, RadialGraph) else RadialGraph(mesh, np.asarray(u0, dtype=float))
    g = project_volume(g, target)
    precond = _Preconditioner(mesh)
    P = perimeter(g)
    history = []
    step = opts.step
    converged = False
    message = "maximum iterations reached"
    it = 0
    while True:
        grad = projected_gradient(g)
        d = -precond(grad)
        gnorm2 = max(-float(grad @ d), 0.0)
        gnorm = math.sqrt(gnorm2)
        history.append((P, volume(g), gnorm))
        if gnorm < opts.grad_tol:
            converged = True
            message = "gradient tolerance reached"
            break
        if it >= opts.max_iter:
            break
        accepted = False
        for _ in range(opts.max_backtracks):
            trial_u = g.u + step * d
            if np.min(trial_u) > -1.0:
                trial = project_volume(g.with_u(trial_u), target)
                P_trial = perimeter(trial)
                if P_trial <= P - opts.armijo * step * gnorm2:
                    accepted = True
                    break
            step *= opts.backtrack
        if not accepted:
            message = f"backtracking exhausted (step {step:.3e}, gradient norm {gnorm:.3e})"
            break
        g, P = trial, P_trial
        step = min(step * opts.growth, opts.max_step)
        it += 1
    vol_err = abs(volume(g) - target) / target
    if vol_err > opts.volume_tol:
        raise VolumeProjectionError(f"final volume off by {vol_err:.3e} relative")
    spread = _spread(project_volume(g, area(mesh) / DIM))
    return SolverResult(
        graph=g,
        iterations=it,
        history=history,
        sector_deficit=sector_deficit(mesh, g),
        converged=converged,
        is_sector=spread < opts.sector_tol,
        spread=spread,
        message=message,
        target=target,
    )


def random_start(mesh: TriangulatedDomain, amplitude: float, rng: np.random.Generator) -> RadialGraph:
    """Smooth random initial graph with sup norm ``amplitude``."""
    return RadialGraph(mesh, amplitude * random_smooth_field(mesh.vertices, rng))


def multistart(
    mesh: TriangulatedDomain,
    target: float,
    n_starts: int,
    amplitude: float = 0.2,
    opts: SolverOptions | None = None,
) -> tuple[list[SolverResult], list[dict]]:
    """Minimize from ``n_starts`` random graphs; also group the end points.

    Returns the individual results and the distinct stationary points found
    (end points closer than ``sector_tol`` in sup norm are merged).
    """
    opts = opts or SolverOptions()
    rng = np.random.default_rng(opts.seed)
    results = [minimize(mesh, random_start(mesh, amplitude, rng), target, opts) for _ in range(n_starts)]
    points: list[dict] = []
    reps: list[np.ndarray] = []
    for k, r in enumerate(results):
        for j, rep in enumerate(reps):
            if np.max(np.abs(r.graph.u - rep)) < opts.sector_tol:
                points[j]["starts"].append(k)
                break
        else:
            reps.append(r.graph.u)
            points.append(
                {
                    "starts": [k],
                    "perimeter": r.history[-1][0],
                    "is_sector": r.is_sector,
                    "sector_deficit": r.sector_deficit,
                }
            )
    return results, points


# -- non-convex counterexample ----------------------------------------------------


@dataclass(frozen=True)
class DumbbellReport:
    deficit: float
    perimeter: float
    area: float
    c1: float
    c2: float
    rho: float
    lobe_volume_ratio: float
    neck_ratio: float
    precondition_met: bool
    h: float

    @property
    def success(self) -> bool:
        return self.deficit < 0.0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["success"] = self.success
        return out


def smoothstep(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def dumbbell_competitor(mesh: TriangulatedDomain, spec: DomainSpec, rho: float) -> RadialGraph:
    """Graph with radial ratio (1+c1)/(1+c2) = rho between the two lobes, at volume area/N.

    The radius switches smoothly across the neck: with alpha the angle from
    the neck center towards lobe 1, 1+u = 1 + (rho - 1) smoothstep(...) before
    volume projection.
    """
    if not rho > 0.0:
        raise ValueError(f"rho must be positive, got {rho}")
    x = mesh.vertices
    # lobe 1 sits at negative x1, lobe 2 at positive x1 (see the boundary construction)
    alpha = np.arctan2(-x[:, 0], x[:, 2])
    half = 0.5 * spec.separation - spec.lobe_aperture  # half length of the neck
    s = smoothstep((alpha + half) / (2.0 * half))
    radial = 1.0 + (rho - 1.0) * s
    g = RadialGraph(mesh, radial - 1.0)
    return project_volume(g, area(mesh) / DIM)


def dumbbell_counterexample(spec: DomainSpec, h: float, rho: float = 3.0) -> DumbbellReport:
    """Evaluate the two-lobe competitor against the sector on a dumbbell.

    A negative deficit shows that the sector does not minimize perimeter at
    its volume in the cone over this domain.
    """
    if spec.kind != "dumbbell":
        raise SpecError("kind", f"expected a dumbbell, got {spec.kind}")
    mesh = triangulate(spec, h)
    g = dumbbell_competitor(mesh, spec, rho)
    a = area(mesh)
    p = perimeter(g)
    x = mesh.vertices
    lobe1 = x[:, 0] < 0.0
    w = mesh.vertex_weights()
    r3 = (1.0 + g.u) ** DIM
    lobe_ratio = float(np.sum((w * r3)[lobe1]) / np.sum((w * r3)[~lobe1]))
    c1 = float(np.max(g.u))
    c2 = float(np.min(g.u))
    neck_ratio = spec.neck_halfwidth / spec.lobe_aperture
    return DumbbellReport(
        deficit=p - a,
        perimeter=p,
        area=a,
        c1=c1,
        c2=c2,
        rho=float(rho),
        lobe_volume_ratio=lobe_ratio,
        neck_ratio=neck_ratio,
        precondition_met=neck_ratio <= 0.1 + 1e-12,
        h=mesh.h,
    )
