"""Small geometric helpers on the unit sphere S^2."""

from __future__ import annotations

import numpy as np

DIM = 3  # ambient dimension N; the toolkit meshes S^{N-1} = S^2 only


def normalize(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def geodesic_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Great-circle distance between unit vectors (broadcasting).

    Uses the chord form ``2 asin(|a-b|/2)`` which stays accurate for nearby
    points, where ``arccos(a.b)`` loses half the digits.
    """
    chord = np.linalg.norm(np.asarray(a) - np.asarray(b), axis=-1)
    return 2.0 * np.arcsin(np.clip(0.5 * chord, 0.0, 1.0))


def chord_to_angle(chord: np.ndarray) -> np.ndarray:
    return 2.0 * np.arcsin(np.clip(0.5 * np.asarray(chord), 0.0, 1.0))


def tangent_frame(c: np.ndarray, hint: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal tangent basis (e1, e2) at unit vector ``c`` with e1 x e2 = c."""
    c = np.asarray(c, dtype=float)
    if hint is None:
        hint = np.array([1.0, 0.0, 0.0]) if abs(c[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = hint - np.dot(hint, c) * c
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.cross(c, e1)
    return e1, e2


def frame_about(center: np.ndarray) -> np.ndarray:
    """Rotation matrix whose rows (e1, e2, center) form a right-handed frame.

    For the north pole this is the identity.
    """
    c = normalize(center)
    if np.allclose(c, [0.0, 0.0, 1.0]):
        return np.eye(3)
    e1, e2 = tangent_frame(c)
    return np.vstack([e1, e2, c])


def spherical_triangle_area(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Spherical excess of geodesic triangles with unit-vector corners (rows).

    Van Oosterom-Strackee: tan(E/2) = |a.(b x c)| / (1 + a.b + b.c + c.a).
    """
    num = np.abs(np.einsum("ij,ij->i", a, np.cross(b, c)))
    den = 1.0 + np.einsum("ij,ij->i", a, b) + np.einsum("ij,ij->i", b, c) + np.einsum("ij,ij->i", c, a)
    return 2.0 * np.arctan2(num, den)


def slerp(a: np.ndarray, b: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Points along the minor great-circle arc from a to b at fractions t."""
    t = np.asarray(t, dtype=float)[:, None]
    omega = float(geodesic_distance(a, b))
    if omega < 1e-15:
        return np.repeat(np.asarray(a, dtype=float)[None, :], len(t), axis=0)
    so = np.sin(omega)
    return (np.sin((1.0 - t) * omega) * a + np.sin(t * omega) * b) / so


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-random rotation matrix via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def rotation_about(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix."""
    k = normalize(axis)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * kx + (1.0 - np.cos(angle)) * kx @ kx
