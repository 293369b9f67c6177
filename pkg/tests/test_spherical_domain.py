import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isocone.sphere import random_rotation, spherical_triangle_area
from isocone.spherical_domain import (
    DomainSpec,
    MeshError,
    SpecError,
    TriangulatedDomain,
    area,
    check_class,
    hausdorff_boundary_distance,
    is_cone_convex,
    map_mesh,
    mesh_quality,
    refine,
    rotate_mesh,
    total_boundary_length,
    triangulate,
)


@pytest.fixture(scope="module")
def cap60():
    return triangulate(DomainSpec.cap(math.pi / 3), 0.08)


# -- specs --------------------------------------------------------------------


@pytest.mark.parametrize(
    "spec",
    [
        DomainSpec.cap(0.7, center=(0.0, 0.6, 0.8), eta=0.1),
        DomainSpec.perturbed_cap(1.0, [(3, 0.05, 0.2), (5, 0.01, 0.0)]),
        DomainSpec.regular_polygon(4, 0.9, rounding=0.2),
        DomainSpec.dumbbell(0.5, 1.4, 0.05),
    ],
)
def test_spec_json_roundtrip(spec):
    back = DomainSpec.from_json(spec.to_json())
    assert back == spec
    assert json.loads(back.to_json()) == json.loads(spec.to_json())


@pytest.mark.parametrize(
    "data, field",
    [
        ({"kind": "cap", "aperture": -0.1}, "aperture"),
        ({"kind": "cap", "aperture": 1.0, "center": [0, 0, 0]}, "center"),
        ({"kind": "cap", "aperture": "wide"}, "aperture"),
        ({"kind": "blob"}, "kind"),
        ({"kind": "cap", "aperture": 1.0, "radius": 3}, "radius"),
        ({"kind": "perturbed_cap", "aperture": 0.5, "modes": [{"m": 3, "amp": 0.6}]}, "modes"),
        ({"kind": "geodesic_polygon", "vertices": [[0, 0, 1], [0, 1, 0]]}, "vertices"),
        ({"kind": "dumbbell", "lobe_aperture": 0.5, "separation": 0.8, "neck_halfwidth": 0.05}, "separation"),
        ({"kind": "dumbbell", "lobe_aperture": 0.5, "separation": 1.4, "neck_halfwidth": 0.6}, "neck_halfwidth"),
        ({"kind": "cap", "aperture": math.pi / 3, "eta": 0.5}, "eta"),
    ],
)
def test_spec_errors_name_the_field(data, field):
    with pytest.raises(SpecError) as exc:
        DomainSpec.from_dict(data).validate()
    assert exc.value.field == field


def test_spec_center_is_normalized():
    spec = DomainSpec.from_dict({"kind": "cap", "aperture": 0.5, "center": [0, 3, 4]})
    assert spec.center == pytest.approx((0.0, 0.6, 0.8))


def test_malformed_json_is_spec_error():
    with pytest.raises(SpecError):
        DomainSpec.from_json('{"kind": "cap", "aperture": ')


def test_h_target_limit():
    with pytest.raises(SpecError) as exc:
        triangulate(DomainSpec.cap(0.4), 0.2)
    assert exc.value.field == "h"


# -- meshing ------------------------------------------------------------------


@pytest.mark.parametrize("aperture, h", [(0.3, 0.05), (math.pi / 3, 0.1), (math.pi / 2, 0.08)])
def test_cap_mesh_quality(aperture, h):
    mesh = triangulate(DomainSpec.cap(aperture), h)
    q = mesh_quality(mesh)
    assert q["h"] <= 1.5 * h
    assert q["min_angle"] > 20.0
    assert np.allclose(np.linalg.norm(mesh.vertices, axis=1), 1.0, atol=1e-12)
    # boundary on the exact circle
    x3 = mesh.boundary_points[:, 2]
    assert np.allclose(x3, math.cos(aperture), atol=1e-12)


def test_area_and_perimeter_converge(cap60):
    exact_area = 2 * math.pi * (1 - math.cos(math.pi / 3))
    exact_len = 2 * math.pi * math.sin(math.pi / 3)
    fine = refine(cap60)
    e0, e1 = abs(area(cap60) - exact_area), abs(area(fine) - exact_area)
    assert e1 < e0 / 3.0  # second order in h
    assert abs(total_boundary_length(fine) - exact_len) < abs(total_boundary_length(cap60) - exact_len)


def test_area_weights_are_spherical_triangle_areas(cap60):
    v, t = cap60.vertices, cap60.triangles
    ref = spherical_triangle_area(v[t[:, 0]], v[t[:, 1]], v[t[:, 2]])
    assert np.allclose(cap60.area_weights, ref, rtol=1e-12)


def test_triangles_oriented_outward(cap60):
    v, t = cap60.vertices, cap60.triangles
    normal = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
    assert np.all(np.einsum("ij,ij->i", normal, v[t].mean(axis=1)) > 0)


def test_metric_positive_definite(cap60):
    assert np.all(cap60.metric_det > 0)
    assert np.allclose(cap60.metric, np.swapaxes(cap60.metric, 1, 2))


@pytest.mark.parametrize(
    "spec, h",
    [
        (DomainSpec.regular_polygon(3, 1.0, rounding=0.2), 0.08),
        (DomainSpec.regular_polygon(5, 0.8), 0.08),
        (DomainSpec.dumbbell(0.5, 1.4, 0.05), 0.04),
        (DomainSpec.perturbed_cap(1.0, [(3, 0.15, 0.0)]), 0.08),
    ],
)
def test_other_kinds_mesh(spec, h):
    mesh = triangulate(spec, h)
    assert mesh_quality(mesh)["h"] <= 1.5 * h
    assert mesh.n_vertices > 50


def test_mesh_json_roundtrip(cap60):
    back = TriangulatedDomain.from_json(cap60.to_json())
    assert np.array_equal(back.vertices, cap60.vertices)
    assert np.array_equal(back.triangles, cap60.triangles)
    assert np.array_equal(back.boundary, cap60.boundary)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.pop("triangles"),
        lambda d: d.update(vertices=[[0, 0, 2]] + d["vertices"][1:]),
        lambda d: d.update(triangles=d["triangles"][1:]),
        lambda d: d.update(boundary=d["boundary"][::-1][:-1]),
    ],
)
def test_corrupted_mesh_rejected(cap60, mutate):
    data = cap60.to_dict()
    mutate(data)
    with pytest.raises(MeshError):
        TriangulatedDomain.from_dict(data)
    with pytest.raises(MeshError):
        TriangulatedDomain.from_json("{not json")


def test_rotation_preserves_geometry(cap60):
    R = random_rotation(np.random.default_rng(3))
    rot = rotate_mesh(cap60, R)
    assert area(rot) == pytest.approx(area(cap60), rel=1e-13)
    assert np.allclose(rot.area_weights, cap60.area_weights, rtol=1e-12)


def test_map_mesh_keeps_connectivity(cap60):
    target = DomainSpec.perturbed_cap(math.pi / 3, [(3, 0.02, 0.0)])
    mapped = map_mesh(cap60, target)
    assert np.array_equal(mapped.triangles, cap60.triangles)
    assert hausdorff_boundary_distance(cap60, mapped) == pytest.approx(0.02, abs=2e-3)


# -- measures ------------------------------------------------------------------


@settings(max_examples=10, deadline=None)
@given(st.floats(0.6, 1.2), st.floats(0.0, 0.2))
def test_hausdorff_between_concentric_caps(a, d):
    m0 = triangulate(DomainSpec.cap(a), 0.1)
    m1 = triangulate(DomainSpec.cap(a + d), 0.1)
    dist = hausdorff_boundary_distance(m0, m1)
    # polyline vertices sit on the exact circles; the chord sag is at most h^2 / 8
    assert dist == pytest.approx(d, abs=0.1**2 / 8 + 1e-3)
    assert dist == hausdorff_boundary_distance(m1, m0)


def test_check_class_examples():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cap = check_class(triangulate(DomainSpec.cap(math.pi / 3), 0.03), 0.3, 0.2)
        high = check_class(triangulate(DomainSpec.cap(math.pi / 3), 0.05), 0.5, 0.2)
        dumb = check_class(triangulate(DomainSpec.dumbbell(0.5, 1.4, 0.05), 0.03), 0.3, 0.2)
    assert cap.in_class
    assert not high.contained_in_cap  # boundary at x3 = cos(pi/3) = 0.5 exactly
    assert not dumb.in_class and not dumb.exterior_ball_ok
    assert dumb.worst_violation_location is not None


def test_check_class_warns_on_coarse_mesh():
    mesh = triangulate(DomainSpec.cap(math.pi / 3), 0.08)
    with pytest.warns(UserWarning):
        check_class(mesh, 0.3, 0.2)


def test_cone_convexity():
    assert is_cone_convex(triangulate(DomainSpec.cap(math.pi / 3), 0.08))
    assert is_cone_convex(triangulate(DomainSpec.regular_polygon(3, 1.0, rounding=0.2), 0.08))
    assert not is_cone_convex(triangulate(DomainSpec.perturbed_cap(1.0, [(3, 0.15, 0.0)]), 0.08))
    assert not is_cone_convex(triangulate(DomainSpec.dumbbell(0.5, 1.4, 0.05), 0.04))
