import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from isocone.legendre_oracle import cap_mu1
from isocone.neumann_eigen import (
    EigenSolverError,
    SWEEP_HEADER,
    assemble,
    coo_text,
    dense_spectrum,
    estimate_c1,
    mu1,
    perturbed_spec,
    poincare_residual,
    rayleigh_quotient,
    stability_sweep,
    sweep_csv,
)
from isocone.sphere import random_rotation
from isocone.spherical_domain import DomainSpec, SpecError, area, refine, triangulate


@pytest.fixture(scope="module")
def small():
    mesh = triangulate(DomainSpec.cap(math.pi / 3), 0.15)
    return mesh, assemble(mesh)


def cotan_stiffness(mesh):
    """Independent P1 stiffness of the flat chord triangles: K_ij = -(cot a + cot b) / 2."""
    v, t = mesh.vertices, mesh.triangles
    rows, cols, vals = [], [], []
    for tri in t:
        for k in range(3):
            i, j, o = tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]
            a, b = v[i] - v[o], v[j] - v[o]
            cot = np.dot(a, b) / np.linalg.norm(np.cross(a, b))
            rows += [i, j, i, j]
            cols += [j, i, i, j]
            vals += [-0.5 * cot, -0.5 * cot, 0.5 * cot, 0.5 * cot]
    n = mesh.n_vertices
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def test_stiffness_matches_cotangent_formula(small):
    mesh, s = small
    ref = cotan_stiffness(mesh)
    assert abs(s.K - ref).max() < 1e-12 * abs(ref).max()


def test_matrix_structure(small):
    mesh, s = small
    assert abs(s.K - s.K.T).max() == 0.0
    assert abs(s.M - s.M.T).max() == 0.0
    assert np.max(np.abs(s.K @ np.ones(s.n))) < 1e-14
    assert s.M.sum() == pytest.approx(area(mesh), rel=1e-13)
    assert np.all(np.linalg.eigvalsh(s.M.toarray()) > 0)


def test_mu1_matches_dense_solver(small):
    mesh, s = small
    w = dense_spectrum(s)
    assert abs(w[0]) < 1e-10
    res = mu1(s)
    assert res.lam == pytest.approx(w[1], rel=1e-10)
    assert res.mu1 == pytest.approx(math.sqrt(w[1]), rel=1e-10)
    v = res.eigenvector
    assert float(v @ (s.M @ v)) == pytest.approx(1.0, rel=1e-12)
    assert abs(float(s.mass_ones @ v)) < 1e-12
    assert np.linalg.norm(s.K @ v - res.lam * (s.M @ v)) < 1e-8 * res.lam


@pytest.mark.parametrize("aperture", [math.pi / 6, math.pi / 4, math.pi / 3])
def test_mu1_against_oracle_at_h005(aperture):
    val = mu1(triangulate(DomainSpec.cap(aperture), 0.05)).mu1
    assert abs(val - cap_mu1(aperture)) / cap_mu1(aperture) < 0.01


def test_second_order_convergence():
    m0 = triangulate(DomainSpec.cap(math.pi / 4), 0.1)
    m1 = refine(m0)
    m2 = refine(m1)
    ref = cap_mu1(math.pi / 4)
    e = [abs(mu1(m).mu1 - ref) for m in (m0, m1, m2)]
    assert 3.0 < e[0] / e[1] < 5.0
    assert 3.0 < e[1] / e[2] < 5.0


def test_rotation_invariance(small):
    mesh, s = small
    R = random_rotation(np.random.default_rng(0))
    assert mu1(mesh.rotated(R)).mu1 == pytest.approx(mu1(s).mu1, rel=1e-12)


def test_deterministic(small):
    _, s = small
    a, b = mu1(s), mu1(s)
    assert a.mu1 == b.mu1 and np.array_equal(a.eigenvector, b.eigenvector)


def test_solver_failure_is_reported(small):
    _, s = small
    with pytest.raises(EigenSolverError) as exc:
        mu1(s, max_iter=1)
    assert exc.value.iterations == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-3, 3))
def test_rayleigh_quotient_bounded_below(small, seed, log_scale):
    mesh, s = small
    c = mu1(s).mu1
    u = np.random.default_rng(seed).standard_normal(s.n) * 10.0**log_scale
    assert rayleigh_quotient(s, u) >= c * (1 - 1e-12)
    assert poincare_residual(s, u, c) >= -1e-10 * max(1.0, 10.0**log_scale)


def test_rayleigh_quotient_rejects_constants(small):
    _, s = small
    with pytest.raises(ValueError, match="constant"):
        rayleigh_quotient(s, np.full(s.n, 2.0))


def test_poincare_tight_on_eigenvector(small):
    _, s = small
    res = mu1(s)
    assert abs(poincare_residual(s, res.eigenvector, res.mu1)) < 1e-10


def test_stability_sweep_rows():
    rows = stability_sweep(DomainSpec.cap(math.pi / 3), [0.02, 0.0, 0.01], 0.1, family="mode")
    assert [r.epsilon for r in rows] == [0.0, 0.01, 0.02]
    assert rows[0].delta_mu1 == 0.0
    assert rows[1].delta_mu1 < rows[2].delta_mu1
    text = sweep_csv(rows)
    assert text.splitlines()[0] == ",".join(SWEEP_HEADER)
    assert "\r" not in text and len(text.splitlines()) == 4


def test_perturbed_spec_families():
    base = DomainSpec.cap(1.0)
    assert perturbed_spec(base, 0.05).colatitude(np.array([0.3]))[0] == pytest.approx(1.05)
    assert perturbed_spec(base, 0.05, "mode", 3).colatitude(np.array([0.0]))[0] == pytest.approx(1.05)
    with pytest.raises(SpecError):
        perturbed_spec(base, 0.05, "twist")


def test_estimate_c1(small):
    mesh, s = small
    assert estimate_c1([mesh]) == pytest.approx(mu1(s).mu1 - 0.005)


def test_coo_text(small):
    _, s = small
    lines = coo_text(s.M).splitlines()
    assert len(lines) == s.M.nnz
    r, c, v = lines[0].split()
    assert float(v) == s.M[int(r), int(c)]
