"""Acceptance criteria, one test each, at the stated tolerances.

Each test records a single pass/fail line; the lines are collected in the
"acceptance criteria" section of the pytest summary.
"""

import math
import time
import warnings

import numpy as np
import pytest

from isocone.legendre_oracle import cap_mu1
from isocone.neumann_eigen import assemble, mu1, poincare_residual, stability_sweep
from isocone.perimeter import (
    Lemma1Params,
    RadialGraph,
    lemma1_bound,
    perimeter,
    random_smooth_field,
    verify_elementary_inequalities,
    volume,
)
from isocone.solver import SolverOptions, dumbbell_counterexample, minimize, random_start
from isocone.sphere import DIM
from isocone.spherical_domain import (
    DomainSpec,
    area,
    check_class,
    hausdorff_boundary_distance,
    triangulate,
)
from isocone.verification import default_convex_suite, finite_difference_error, small_graphs

SQRT2 = math.sqrt(2.0)
CAPS = (math.pi / 6, math.pi / 4, math.pi / 3)

# perturbed specimens of the pi/3 cap: (mode, amplitude, phase) lists
PERTURBED = [
    [(2, 0.015, 0.3)],
    [(3, 0.02, 0.0)],
    [(4, 0.015, 1.0)],
    [(5, 0.01, 0.5)],
    [(2, 0.01, 0.0), (3, 0.008, 1.2)],
]


def test_c01_eigenvalue_oracle(report_criterion):
    t0 = time.perf_counter()
    errors = {}
    for ap in CAPS:
        ref = cap_mu1(ap)
        for h in (0.05, 0.025):
            errors[(ap, h)] = abs(mu1(triangulate(DomainSpec.cap(ap), h)).mu1 - ref) / ref
    elapsed = time.perf_counter() - t0
    ok = (
        all(errors[(ap, 0.05)] < 0.01 for ap in CAPS)
        and all(errors[(ap, 0.025)] < 0.003 for ap in CAPS)
        and elapsed < 60.0
    )
    worst05 = max(errors[(ap, 0.05)] for ap in CAPS)
    worst025 = max(errors[(ap, 0.025)] for ap in CAPS)
    report_criterion(
        1, "eigenvalue oracle match", ok,
        f"max rel err {worst05:.2e} (h=0.05), {worst025:.2e} (h=0.025), {elapsed:.1f} s",
    )
    assert ok


def test_c02_hemisphere(report_criterion):
    val = mu1(triangulate(DomainSpec.cap(math.pi / 2), 0.025)).mu1
    rel = abs(val - SQRT2) / SQRT2
    ok = rel < 0.005
    report_criterion(2, "hemisphere anchor", ok, f"mu1={val:.6f}, rel err {rel:.2e}")
    assert ok


def test_c03_mu1_threshold(report_criterion):
    margins = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # coarse mesh vs r/5 resolution advice
        for spec in default_convex_suite(0.3):
            mesh = triangulate(spec, 0.05)
            assert check_class(mesh, 0.3, 0.2).contained_in_cap
            margins.append(mu1(mesh).mu1 - (SQRT2 + 0.01))
    ok = len(margins) == 5 and min(margins) > 0
    report_criterion(3, "mu1 above sqrt(2) threshold", ok, f"min mu1 - (sqrt2+0.01) = {min(margins):.4f} over 5 specimens")
    assert ok


def test_c04_poincare_exactness(report_criterion):
    rng = np.random.default_rng(4)
    worst, count = math.inf, 0
    for spec in default_convex_suite(0.3):
        mesh = triangulate(spec, 0.08)
        s = assemble(mesh)
        c = mu1(s).mu1
        for k in range(1000):
            if k % 3 == 0:
                u = rng.standard_normal(s.n)
            elif k % 3 == 1:
                u = random_smooth_field(mesh.vertices, rng)
            else:
                u = rng.uniform(-1, 1, s.n) * 10.0 ** rng.uniform(-3, 1)
            worst = min(worst, poincare_residual(s, u, c) + 1e-10)
            count += 1
    ok = worst >= 0
    report_criterion(4, "discrete Poincare exactness", ok, f"{count} vectors, min slack {worst:.3e}")
    assert ok


def test_c05_lemma_bound(report_criterion):
    params = Lemma1Params(delta=0.1, epsilon=0.03)
    rng = np.random.default_rng(5)
    holds, total, worst = 0, 0, math.inf
    for ap, h, n in ((math.pi / 6, 0.05, 333), (math.pi / 4, 0.06, 333), (math.pi / 3, 0.08, 334)):
        mesh = triangulate(DomainSpec.cap(ap), h)
        target = area(mesh) / DIM
        for g in small_graphs(mesh, n, 0.03, rng):
            assert g.sup_norm < 0.03 and g.grad_sup_norm < 0.03
            assert abs(volume(g) - target) <= 1e-12 * target
            margin = perimeter(g) - lemma1_bound(g, params)
            holds += margin >= 0
            worst = min(worst, margin)
            total += 1
    ok = total == 1000 and holds == 1000
    report_criterion(5, "perimeter lower bound", ok, f"{holds}/{total} hold, worst margin {worst:.3e}")
    assert ok


def test_c06_elementary_inequalities(report_criterion):
    rep = verify_elementary_inequalities(100_000, seed=6)
    fails = {k: r["failures"] for k, r in rep.items()}
    ok = len(rep) == 4 and all(r["samples"] == 100_000 for r in rep.values()) and sum(fails.values()) == 0
    report_criterion(6, "elementary inequalities", ok, f"failures {fails}")
    assert ok


def test_c07_gradient_correctness(report_criterion):
    rng = np.random.default_rng(7)
    specs = [
        (DomainSpec.cap(math.pi / 6), 0.08),
        (DomainSpec.cap(math.pi / 3), 0.15),
        (DomainSpec.perturbed_cap(math.pi / 4, [(3, 0.05, 0.2)]), 0.12),
        (DomainSpec.regular_polygon(3, 1.0, rounding=0.2), 0.1),
        (DomainSpec.dumbbell(0.5, 1.4, 0.05), 0.1),
    ]
    worst = worst_entry = 0.0
    for spec, h in specs:
        mesh = triangulate(spec, h)
        for _ in range(10):
            amp = rng.uniform(0.05, 0.5)
            g = RadialGraph(mesh, amp * random_smooth_field(mesh.vertices, rng))
            worst = max(worst, finite_difference_error(g))
            worst_entry = max(worst_entry, finite_difference_error(g, step=1e-5, componentwise=True))
    ok = worst < 1e-5
    report_criterion(
        7, "perimeter gradient", ok,
        f"50 pairs, max rel err {worst:.2e} (largest single-entry rel err {worst_entry:.1e})",
    )
    assert ok


@pytest.mark.slow
def test_c08_sector_minimizes(report_criterion):
    t0 = time.perf_counter()
    cap = DomainSpec.cap(math.pi / 3)
    cap_mesh = triangulate(cap, 0.03)
    specs = [cap] + [DomainSpec.perturbed_cap(math.pi / 3, m) for m in PERTURBED]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for spec in specs[1:]:
            fine = triangulate(spec, 0.03)
            assert hausdorff_boundary_distance(fine, cap_mesh) <= 0.02 + 1e-12
            assert check_class(fine, 0.3, 0.2).in_class
    opts = SolverOptions()
    runs, worst_spread = 0, 0.0
    failures = []
    for k, spec in enumerate(specs):
        mesh = triangulate(spec, 0.08)
        target = area(mesh) / DIM
        rng = np.random.default_rng(800 + k)
        for j in range(20):
            r = minimize(mesh, random_start(mesh, 0.2, rng), target, opts)
            runs += 1
            worst_spread = max(worst_spread, r.spread)
            if not (r.converged and r.is_sector and r.spread < 1e-3):
                failures.append((k, j, r.message))
    elapsed = time.perf_counter() - t0
    ok = not failures and runs == 120 and elapsed < 600
    report_criterion(
        8, "sector is the minimizer", ok,
        f"{runs - len(failures)}/{runs} runs reach the sector, max spread {worst_spread:.1e}, {elapsed:.1f} s",
    )
    assert ok, failures


def test_c09_eigenvalue_stability(report_criterion):
    base = DomainSpec.cap(math.pi / 3)
    parts, ok = [], True
    for family in ("concentric", "mode"):
        rows = stability_sweep(base, [0.05, 0.02, 0.01], 0.05, family=family, mode=3)
        eps = [r.epsilon for r in rows]
        deltas = [r.delta_mu1 for r in rows]
        assert eps == sorted(eps)
        ok &= all(b > a for a, b in zip(deltas, deltas[1:]))
        parts.append(f"{family}: " + " < ".join(f"{d:.2e}" for d in deltas))
    report_criterion(9, "eigenvalue stability", ok, "; ".join(parts))
    assert ok


def test_c10_dumbbell(report_criterion):
    rep = dumbbell_counterexample(DomainSpec.dumbbell(0.5, 1.4, 0.05), 0.03)
    ok = rep.deficit < 0 and rep.precondition_met
    report_criterion(10, "dumbbell counterexample", ok, f"sector deficit {rep.deficit:.4f}")
    assert ok


def test_c11_scaling_homogeneity(report_criterion):
    rng = np.random.default_rng(11)
    meshes = [triangulate(DomainSpec.cap(ap), 0.1) for ap in CAPS]
    meshes.append(triangulate(DomainSpec.regular_polygon(4, 0.9, rounding=0.2), 0.1))
    worst = 0.0
    for k in range(100):
        mesh = meshes[k % len(meshes)]
        g = RadialGraph(mesh, rng.uniform(0.05, 0.6) * random_smooth_field(mesh.vertices, rng))
        s = rng.uniform(0.2, 5.0)
        gs = g.with_u(s * (1.0 + g.u) - 1.0)
        worst = max(
            worst,
            abs(perimeter(gs) - s**2 * perimeter(g)) / (s**2 * perimeter(g)),
            abs(volume(gs) - s**3 * volume(g)) / (s**3 * volume(g)),
        )
    ok = worst < 1e-12
    report_criterion(11, "scaling homogeneity", ok, f"100 graphs, max rel err {worst:.1e}")
    assert ok
