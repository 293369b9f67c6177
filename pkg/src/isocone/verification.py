"""Named invariant checks bundled into one desk-scale verification run.

Every check returns a :class:`CheckResult` whose ``worst_margin`` is the
smallest slack observed (negative means the invariant failed).
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .legendre_oracle import cap_mu1
from .neumann_eigen import assemble, mu1, poincare_residual, stability_sweep
from .perimeter import (
    Lemma1Params,
    RadialGraph,
    barycenter_bound,
    fem_system,
    lemma1_bound,
    perimeter,
    perimeter_gradient,
    random_smooth_field,
    verify_elementary_inequalities,
    volume,
)
from .solver import (
    dumbbell_counterexample,
    minimize,
    project_volume,
    projected_gradient,
    random_start,
    sector_deficit,
)
from .sphere import DIM, random_rotation
from .spherical_domain import (
    DomainSpec,
    TriangulatedDomain,
    area,
    check_class,
    hausdorff_boundary_distance,
    is_cone_convex,
    refine,
    triangulate,
)

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst_margin: float
    detail: str = ""
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def default_convex_suite(eta: float = 0.3) -> list[DomainSpec]:
    """Three caps and two rounded regular polygons compactly inside {x3 > eta}."""
    return [
        DomainSpec.cap(math.pi / 6, eta=eta),
        DomainSpec.cap(math.pi / 4, eta=eta),
        DomainSpec.cap(math.pi / 3, eta=eta),
        DomainSpec.regular_polygon(3, 1.0, rounding=0.2, eta=eta),
        DomainSpec.regular_polygon(4, 0.9, rounding=0.2, eta=eta),
    ]


def small_graphs(
    mesh: TriangulatedDomain, n: int, bound: float, rng: np.random.Generator
) -> list[RadialGraph]:
    """Volume-normalized smooth graphs with ||u||_inf and ||grad u||_inf below ``bound``."""
    target = area(mesh) / DIM
    out = []
    while len(out) < n:
        f = 0.5 * random_smooth_field(mesh.vertices, rng, max_freq=3.0)
        g = RadialGraph(mesh, f)
        scale = rng.uniform(0.2, 0.95) * bound / max(g.sup_norm, g.grad_sup_norm)
        g = project_volume(RadialGraph(mesh, scale * f), target)
        if g.sup_norm < bound and g.grad_sup_norm < bound:
            out.append(g)
    return out


# -- individual checks -------------------------------------------------------------


def check_area_order2(seed: int) -> tuple[bool, float, str]:
    m0 = triangulate(DomainSpec.cap(math.pi / 3), 0.1)
    m1 = refine(m0)
    e0, e1 = abs(area(m0) - math.pi), abs(area(m1) - math.pi)
    ratio = e0 / e1
    return 3.0 <= ratio <= 5.0, min(ratio - 3.0, 5.0 - ratio), f"error ratio {ratio:.3f}"


def check_fem_structure(mesh: TriangulatedDomain) -> tuple[bool, float, str]:
    s = assemble(mesh)
    k1 = np.max(np.abs(s.K @ np.ones(s.n))) / np.max(np.abs(s.K.data))
    mass = abs(s.area - area(mesh)) / area(mesh)
    sym = max(abs(s.K - s.K.T).max(), abs(s.M - s.M.T).max())
    margin = min(1e-10 - k1, 1e-10 - mass, 1e-12 - sym)
    return margin > 0, margin, f"K1={k1:.2e} mass={mass:.2e} asym={sym:.2e}"


def check_mu1_oracle(seed: int) -> tuple[bool, float, str]:
    worst, parts = math.inf, []
    for ap in (math.pi / 6, math.pi / 4, math.pi / 3):
        ref = cap_mu1(ap)
        val = mu1(triangulate(DomainSpec.cap(ap), 0.05)).mu1
        rel = abs(val - ref) / ref
        worst = min(worst, 0.01 - rel)
        parts.append(f"{ap:.4f}:{rel:.2e}")
    return worst > 0, worst, " ".join(parts)


def check_hemisphere(seed: int) -> tuple[bool, float, str]:
    val = mu1(triangulate(DomainSpec.cap(math.pi / 2), 0.05)).mu1
    rel = abs(val - SQRT2) / SQRT2
    return rel < 0.005, 0.005 - rel, f"mu1={val:.6f}"


def check_rotation_invariance(seed: int) -> tuple[bool, float, str]:
    rng = np.random.default_rng(seed)
    R = random_rotation(rng)
    a = triangulate(DomainSpec.cap(math.pi / 3), 0.06)
    b = triangulate(DomainSpec.cap(math.pi / 3 + 0.05), 0.06)
    d = triangulate(DomainSpec.perturbed_cap(math.pi / 3, [(3, 0.15, 0.0)]), 0.06)
    ra, rb, rd = a.rotated(R), b.rotated(R), d.rotated(R)
    diffs = [
        abs(mu1(a).mu1 - mu1(ra).mu1),
        abs(area(a) - area(ra)),
        abs(hausdorff_boundary_distance(a, b) - hausdorff_boundary_distance(ra, rb)),
    ]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        c0, c1 = check_class(d, 0.0, 0.2), check_class(rd, -1.0, 0.2)
    same_bool = (c0.interior_ball_ok, c0.exterior_ball_ok) == (c1.interior_ball_ok, c1.exterior_ball_ok)
    same_convex = is_cone_convex(d, 500, seed) == is_cone_convex(rd, 500, seed)
    worst = 1e-8 - diffs[0]
    worst = min(worst, 1e-10 - max(diffs[1:]))
    ok = worst > 0 and same_bool and same_convex
    return ok, worst, f"mu1 {diffs[0]:.1e} area {diffs[1]:.1e} hausdorff {diffs[2]:.1e}"


def check_hausdorff_metric(seed: int) -> tuple[bool, float, str]:
    ms = [triangulate(DomainSpec.cap(math.pi / 3 + e), 0.05) for e in (0.0, 0.03, 0.07)]
    h = max(m.h for m in ms)
    d = hausdorff_boundary_distance
    sym = abs(d(ms[0], ms[2]) - d(ms[2], ms[0]))
    tri = d(ms[0], ms[1]) + d(ms[1], ms[2]) + 2 * h - d(ms[0], ms[2])
    return sym == 0.0 and tri >= 0, min(tri, -sym), f"symmetry gap {sym:.1e}"


def check_mu1_threshold(seed: int) -> tuple[bool, float, str]:
    worst, parts = math.inf, []
    for spec in default_convex_suite(0.3):
        val = mu1(triangulate(spec, 0.05)).mu1
        worst = min(worst, val - SQRT2 - 0.01)
        parts.append(f"{val:.4f}")
    return worst > 0, worst, "mu1 " + " ".join(parts)


def check_poincare(seed: int, n: int = 200) -> tuple[bool, float, str]:
    mesh = triangulate(DomainSpec.cap(math.pi / 3), 0.08)
    s = assemble(mesh)
    res = mu1(s)
    rng = np.random.default_rng(seed)
    worst = math.inf
    for k in range(n):
        u = random_smooth_field(mesh.vertices, rng) if k % 2 else rng.standard_normal(s.n)
        worst = min(worst, poincare_residual(s, u, res.mu1))
    worst = min(worst, poincare_residual(s, res.eigenvector, res.mu1))
    return worst >= -1e-10, worst + 1e-10, f"{n + 1} vectors"


def check_scaling(seed: int, n: int = 20) -> tuple[bool, float, str]:
    mesh = triangulate(DomainSpec.cap(math.pi / 3), 0.1)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        g = RadialGraph(mesh, 0.3 * random_smooth_field(mesh.vertices, rng))
        s = rng.uniform(0.5, 2.0)
        gs = g.with_u(s * (1.0 + g.u) - 1.0)
        worst = max(
            worst,
            abs(perimeter(gs) / (s * s * perimeter(g)) - 1.0),
            abs(volume(gs) / (s**3 * volume(g)) - 1.0),
        )
    return worst < 1e-12, 1e-12 - worst, f"max relative error {worst:.1e}"


def finite_difference_error(g: RadialGraph, step: float = 1e-6, componentwise: bool = False) -> float:
    """Relative error of the perimeter gradient against central differences.

    The default is the vector relative error ||fd - grad||_2 / ||grad||_2.
    ``componentwise=True`` returns the largest per-entry relative error
    instead; it is dominated by difference round-off (about 1e-10 absolute)
    on entries whose gradient is tiny.
    """
    grad = perimeter_gradient(g)
    u = g.u
    fd = np.empty_like(u)
    for i in range(len(u)):
        e = np.zeros_like(u)
        e[i] = step
        fd[i] = (perimeter(g.with_u(u + e)) - perimeter(g.with_u(u - e))) / (2.0 * step)
    if componentwise:
        return float(np.max(np.abs(fd - grad) / np.maximum(np.abs(grad), 1e-300)))
    return float(np.linalg.norm(fd - grad) / np.linalg.norm(grad))


def check_gradient(seed: int, n: int = 3) -> tuple[bool, float, str]:
    mesh = triangulate(DomainSpec.cap(math.pi / 3), 0.15)
    rng = np.random.default_rng(seed)
    worst = max(
        finite_difference_error(RadialGraph(mesh, 0.2 * random_smooth_field(mesh.vertices, rng)))
        for _ in range(n)
    )
    return worst < 1e-5, 1e-5 - worst, f"max relative error {worst:.1e}"


def check_stationarity(seed: int) -> tuple[bool, float, str]:
    worst = 0.0
    for ap in (math.pi / 6, math.pi / 4, math.pi / 3):
        mesh = triangulate(DomainSpec.cap(ap), min(0.08, ap / 5))
        g = RadialGraph(mesh, np.zeros(mesh.n_vertices))
        worst = max(worst, float(np.linalg.norm(projected_gradient(g))))
    return worst < 1e-8, 1e-8 - worst, f"max projected gradient {worst:.1e}"


def check_small_graphs(seed: int, n: int = 100) -> tuple[bool, float, str]:
    """Local sector optimality, the lemma bound, barycenter and deficit bounds on one batch."""
    mesh = triangulate(DomainSpec.cap(math.pi / 3), 0.08)
    rng = np.random.default_rng(seed)
    a = area(mesh)
    m = mu1(mesh).mu1
    params = Lemma1Params(delta=0.1, epsilon=0.03)
    c_def = 0.5 - 1.0 / m**2 - 0.05
    worst = math.inf
    s = fem_system(mesh)
    for g in small_graphs(mesh, n, 0.03, rng):
        p = perimeter(g)
        bary, bary_rhs = barycenter_bound(g)
        worst = min(
            worst,
            p - (a - 1e-10),
            p - lemma1_bound(g, params),
            bary_rhs - bary,
            sector_deficit(mesh, g) - c_def * s.grad_norm(g.u) ** 2,
        )
    return worst >= 0, worst, f"{n} graphs"


def check_inequalities(seed: int) -> tuple[bool, float, str]:
    rep = verify_elementary_inequalities(100_000, seed)
    fails = sum(r["failures"] for r in rep.values())
    worst = min(r["worst_margin"] for r in rep.values())
    return fails == 0, worst, f"{fails} failures"


def check_solver(seed: int, n: int = 5) -> tuple[bool, float, str]:
    mesh = triangulate(DomainSpec.cap(math.pi / 3), 0.1)
    rng = np.random.default_rng(seed)
    target = area(mesh) / DIM
    worst, mono = math.inf, 0.0
    for _ in range(n):
        r = minimize(mesh, random_start(mesh, 0.2, rng), target)
        worst = min(worst, 1e-3 - r.spread)
        hist = [h[0] for h in r.history]
        mono = max(mono, float(np.max(np.diff(hist))) if len(hist) > 1 else 0.0)
    a = minimize(mesh, random_start(mesh, 0.2, np.random.default_rng(seed)), target)
    b = minimize(mesh, random_start(mesh, 0.2, np.random.default_rng(seed)), target)
    deterministic = a.history == b.history
    worst = min(worst, 1e-12 - mono)
    return worst > 0 and deterministic, worst, f"monotone step {mono:.1e}, deterministic={deterministic}"


def check_stability(seed: int) -> tuple[bool, float, str]:
    base = DomainSpec.cap(math.pi / 3)
    worst, parts = math.inf, []
    for family in ("concentric", "mode"):
        rows = stability_sweep(base, [0.05, 0.02, 0.01], 0.06, family=family)
        deltas = [r.delta_mu1 for r in rows]  # sorted by increasing epsilon
        worst = min(worst, min(b - a for a, b in zip(deltas, deltas[1:])))
        parts.append(family + ":" + ",".join(f"{x:.2e}" for x in deltas))
    return worst > 0, worst, " ".join(parts)


def check_dumbbell(seed: int) -> tuple[bool, float, str]:
    rep = dumbbell_counterexample(DomainSpec.dumbbell(0.5, 1.4, 0.05), 0.03)
    return rep.deficit < 0, -rep.deficit, f"deficit {rep.deficit:.4f}"


def check_class_examples(seed: int) -> tuple[bool, float, str]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cap = check_class(triangulate(DomainSpec.cap(math.pi / 3), 0.03), 0.3, 0.2)
        dumb = check_class(triangulate(DomainSpec.dumbbell(0.5, 1.4, 0.05), 0.03), 0.3, 0.2)
    ok = cap.in_class and not dumb.exterior_ball_ok
    return ok, dumb.worst_violation_depth if ok else -1.0, f"cap in class {cap.in_class}, dumbbell exterior {dumb.exterior_ball_ok}"


CHECKS: dict[str, Callable[[int], tuple[bool, float, str]]] = {
    "mesh_area_order2": check_area_order2,
    "fem_structure": lambda seed: check_fem_structure(triangulate(DomainSpec.cap(math.pi / 2), 0.05)),
    "mu1_legendre_oracle": check_mu1_oracle,
    "mu1_hemisphere": check_hemisphere,
    "rotation_invariance": check_rotation_invariance,
    "hausdorff_metric": check_hausdorff_metric,
    "class_membership": check_class_examples,
    "mu1_threshold": check_mu1_threshold,
    "poincare_exactness": check_poincare,
    "scaling_homogeneity": check_scaling,
    "perimeter_gradient": check_gradient,
    "sector_stationarity": check_stationarity,
    "small_graph_bounds": check_small_graphs,
    "elementary_inequalities": check_inequalities,
    "solver_sector": check_solver,
    "mu1_stability": check_stability,
    "dumbbell_counterexample": check_dumbbell,
}


def mesh_checks(mesh: TriangulatedDomain, seed: int) -> list[CheckResult]:
    """Structure and Poincare checks on a user-supplied mesh."""
    t = time.perf_counter()
    ok, margin, detail = check_fem_structure(mesh)
    out = [CheckResult("user_mesh_fem_structure", ok, margin, detail, time.perf_counter() - t)]
    t = time.perf_counter()
    s = assemble(mesh)
    res = mu1(s)
    rng = np.random.default_rng(seed)
    worst = min(poincare_residual(s, rng.standard_normal(s.n), res.mu1) for _ in range(100))
    out.append(
        CheckResult("user_mesh_poincare", worst >= -1e-10, worst + 1e-10, f"mu1={res.mu1:.6f}", time.perf_counter() - t)
    )
    return out


def verify_all(seed: int = 0, mesh: TriangulatedDomain | None = None) -> list[CheckResult]:
    """Run every named invariant check; a raised exception counts as a failure."""
    results = []
    for name, fn in CHECKS.items():
        t = time.perf_counter()
        try:
            ok, margin, detail = fn(seed)
        except Exception as exc:  # report, never abort the summary
            ok, margin, detail = False, -math.inf, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(ok), float(margin), detail, time.perf_counter() - t))
    if mesh is not None:
        results.extend(mesh_checks(mesh, seed))
    return results
