"""Declarative descriptions of spherical domains and their JSON form."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..sphere import frame_about, normalize

KINDS = ("cap", "perturbed_cap", "geodesic_polygon", "dumbbell")
NORTH = (0.0, 0.0, 1.0)


# boundary points closer than this to the plane x3 = eta count as touching it
CONTAINMENT_TOL = 1e-12


def _unit(v: np.ndarray) -> np.ndarray:
    """Normalize, leaving vectors that are already unit to rounding untouched (keeps JSON round trips exact)."""
    n = float(np.linalg.norm(v))
    return v if abs(n - 1.0) <= 4e-16 else v / n


class SpecError(ValueError):
    """Invalid or degenerate domain description; ``field`` names the culprit."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class FourierMode:
    m: int
    amp: float
    phase: float = 0.0


@dataclass(frozen=True)
class DomainSpec:
    """A spherical domain A on S^2.

    Only the fields relevant to ``kind`` are used:

    * ``cap``: ``center``, ``aperture``
    * ``perturbed_cap``: ``center``, ``aperture``, ``modes``; boundary
      colatitude theta(phi) = aperture + sum amp cos(m phi + phase)
    * ``geodesic_polygon``: ``vertices`` (counterclockwise), ``rounding``
    * ``dumbbell``: ``lobe_aperture``, ``separation``, ``neck_halfwidth``,
      ``rounding``

    ``eta`` optionally declares the enclosing cap S+(eta) = {x3 > eta}; when
    set, the boundary must stay strictly above it. Angles are radians.
    """

    kind: str
    center: tuple[float, float, float] = NORTH
    aperture: float | None = None
    modes: tuple[FourierMode, ...] = ()
    vertices: tuple[tuple[float, float, float], ...] = ()
    rounding: float = 0.0
    lobe_aperture: float | None = None
    separation: float | None = None
    neck_halfwidth: float | None = None
    eta: float | None = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def cap(cls, aperture: float, center=NORTH, eta: float | None = None) -> "DomainSpec":
        return cls(kind="cap", center=tuple(map(float, center)), aperture=float(aperture), eta=eta)

    @classmethod
    def perturbed_cap(cls, aperture: float, modes, center=NORTH, eta: float | None = None) -> "DomainSpec":
        modes = tuple(m if isinstance(m, FourierMode) else FourierMode(*m) for m in modes)
        return cls(
            kind="perturbed_cap",
            center=tuple(map(float, center)),
            aperture=float(aperture),
            modes=modes,
            eta=eta,
        )

    @classmethod
    def polygon(cls, vertices, rounding: float = 0.0, eta: float | None = None) -> "DomainSpec":
        verts = tuple(tuple(map(float, _unit(np.asarray(v, dtype=float)))) for v in vertices)
        return cls(kind="geodesic_polygon", vertices=verts, rounding=float(rounding), eta=eta)

    @classmethod
    def regular_polygon(
        cls, n: int, circumradius: float, rounding: float = 0.0, rotation: float = 0.0, eta: float | None = None
    ) -> "DomainSpec":
        """Regular geodesic n-gon centered at the north pole."""
        phi = rotation + 2.0 * math.pi * np.arange(n) / n
        s, c = math.sin(circumradius), math.cos(circumradius)
        verts = np.column_stack([s * np.cos(phi), s * np.sin(phi), np.full(n, c)])
        return cls.polygon(verts, rounding=rounding, eta=eta)

    @classmethod
    def dumbbell(
        cls,
        lobe_aperture: float,
        separation: float,
        neck_halfwidth: float,
        rounding: float = 0.1,
        eta: float | None = None,
    ) -> "DomainSpec":
        return cls(
            kind="dumbbell",
            lobe_aperture=float(lobe_aperture),
            separation=float(separation),
            neck_halfwidth=float(neck_halfwidth),
            rounding=float(rounding),
            eta=eta,
        )

    # -- derived ------------------------------------------------------------

    @property
    def frame(self) -> np.ndarray:
        return frame_about(np.asarray(self.center, dtype=float))

    def colatitude(self, phi: np.ndarray) -> np.ndarray:
        """Boundary colatitude theta(phi) about ``center`` (caps only)."""
        if self.kind not in ("cap", "perturbed_cap"):
            raise SpecError("kind", f"colatitude profile undefined for {self.kind}")
        phi = np.asarray(phi, dtype=float)
        theta = np.full_like(phi, self.aperture)
        for mode in self.modes:
            theta = theta + mode.amp * np.cos(mode.m * phi + mode.phase)
        return theta

    def size(self) -> float:
        """Characteristic angular radius used to bound mesh resolution."""
        if self.kind in ("cap", "perturbed_cap"):
            return float(self.aperture)
        if self.kind == "dumbbell":
            return float(self.lobe_aperture)
        verts = np.asarray(self.vertices)
        c = normalize(verts.sum(axis=0))
        return float(np.min(np.arccos(np.clip(verts @ c, -1.0, 1.0))) * 0.5)

    def boundary(self):
        from .boundary import boundary_curve

        return boundary_curve(self)

    # -- validation ---------------------------------------------------------

    def validate(self) -> "DomainSpec":
        if self.kind not in KINDS:
            raise SpecError("kind", f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if self.eta is not None and not 0.0 <= self.eta < 1.0:
            raise SpecError("eta", f"must lie in [0, 1), got {self.eta}")
        if self.rounding < 0.0 or self.rounding >= math.pi / 2:
            raise SpecError("rounding", f"must lie in [0, pi/2), got {self.rounding}")
        if self.kind in ("cap", "perturbed_cap"):
            if self.aperture is None:
                raise SpecError("aperture", "required")
            # pi/2 is admitted for hemisphere validation meshes (outside the class)
            if not 0.0 < self.aperture <= math.pi / 2:
                raise SpecError("aperture", f"must lie in (0, pi/2], got {self.aperture}")
            if not np.isclose(np.linalg.norm(self.center), 1.0, atol=1e-12):
                raise SpecError("center", "must be a unit vector")
            total = sum(abs(m.amp) for m in self.modes)
            if total >= self.aperture:
                raise SpecError("modes", f"sum of |amp| = {total} must stay below aperture {self.aperture}")
            for mode in self.modes:
                if int(mode.m) != mode.m or mode.m < 1:
                    raise SpecError("modes", f"mode number must be a positive integer, got {mode.m}")
            if self.aperture + total > math.pi / 2 + 1e-12:
                raise SpecError("modes", "boundary leaves the open hemisphere")
        elif self.kind == "geodesic_polygon":
            if len(self.vertices) < 3:
                raise SpecError("vertices", "need at least 3 vertices")
        else:
            for name in ("lobe_aperture", "separation", "neck_halfwidth"):
                val = getattr(self, name)
                if val is None:
                    raise SpecError(name, "required")
                if not 0.0 < val < math.pi / 2:
                    raise SpecError(name, f"must lie in (0, pi/2), got {val}")
            if self.neck_halfwidth >= self.lobe_aperture:
                raise SpecError("neck_halfwidth", "must be smaller than lobe_aperture")
            if self.separation <= 2.0 * self.lobe_aperture:
                raise SpecError("separation", "lobes overlap; need separation > 2 * lobe_aperture")
            if self.separation / 2.0 + self.lobe_aperture >= math.pi / 2:
                raise SpecError("separation", "lobes leave the open hemisphere")
        if self.eta is not None:
            x3 = self.boundary().dense_points()[:, 2]
            if x3.min() <= self.eta + CONTAINMENT_TOL:
                raise SpecError(
                    "eta", f"boundary reaches x3 = {x3.min():.6g} <= eta = {self.eta}; not inside S+(eta)"
                )
        return self

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.kind in ("cap", "perturbed_cap"):
            out["aperture"] = self.aperture
            if tuple(self.center) != NORTH or self.kind == "cap":
                out["center"] = list(self.center)
            if self.kind == "perturbed_cap":
                out["modes"] = [{"m": m.m, "amp": m.amp, "phase": m.phase} for m in self.modes]
        elif self.kind == "geodesic_polygon":
            out["vertices"] = [list(v) for v in self.vertices]
            out["rounding"] = self.rounding
        else:
            out.update(
                lobe_aperture=self.lobe_aperture,
                separation=self.separation,
                neck_halfwidth=self.neck_halfwidth,
                rounding=self.rounding,
            )
        if self.eta is not None:
            out["eta"] = self.eta
        return out

    @classmethod
    def from_dict(cls, data: Any) -> "DomainSpec":
        if not isinstance(data, dict):
            raise SpecError("domain", f"expected a JSON object, got {type(data).__name__}")
        kind = data.get("kind")
        if kind not in KINDS:
            raise SpecError("kind", f"unknown or missing kind {kind!r}")
        known = {
            "cap": {"kind", "center", "aperture", "eta"},
            "perturbed_cap": {"kind", "center", "aperture", "modes", "eta"},
            "geodesic_polygon": {"kind", "vertices", "rounding", "eta"},
            "dumbbell": {"kind", "lobe_aperture", "separation", "neck_halfwidth", "rounding", "eta"},
        }[kind]
        for key in data:
            if key not in known:
                raise SpecError(key, f"unexpected field for kind {kind!r}")
        eta = _num(data, "eta", required=False)
        if kind == "cap":
            center = _vec3(data.get("center", NORTH), "center")
            spec = cls.cap(_num(data, "aperture"), center=center, eta=eta)
        elif kind == "perturbed_cap":
            center = _vec3(data.get("center", NORTH), "center")
            raw_modes = data.get("modes", [])
            if not isinstance(raw_modes, list):
                raise SpecError("modes", "expected a list")
            modes = []
            for i, m in enumerate(raw_modes):
                if not isinstance(m, dict) or "m" not in m or "amp" not in m:
                    raise SpecError(f"modes[{i}]", "expected {m, amp[, phase]}")
                if not isinstance(m["m"], int) or isinstance(m["m"], bool):
                    raise SpecError(f"modes[{i}].m", "expected an integer")
                modes.append(FourierMode(int(m["m"]), _num(m, "amp", where=f"modes[{i}].amp"),
                                         _num(m, "phase", required=False, where=f"modes[{i}].phase") or 0.0))
            spec = cls.perturbed_cap(_num(data, "aperture"), modes, center=center, eta=eta)
        elif kind == "geodesic_polygon":
            verts = data.get("vertices")
            if not isinstance(verts, list):
                raise SpecError("vertices", "expected a list of 3-vectors")
            pts = [_vec3(v, f"vertices[{i}]") for i, v in enumerate(verts)]
            spec = cls.polygon(pts, rounding=_num(data, "rounding", required=False) or 0.0, eta=eta)
        else:
            spec = cls.dumbbell(
                _num(data, "lobe_aperture"),
                _num(data, "separation"),
                _num(data, "neck_halfwidth"),
                rounding=_num(data, "rounding", required=False) if "rounding" in data else 0.1,
                eta=eta,
            )
        return spec

    @classmethod
    def from_json(cls, text: str) -> "DomainSpec":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError("domain", f"malformed JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _num(data: dict, key: str, required: bool = True, where: str | None = None) -> float | None:
    where = where or key
    if key not in data or data[key] is None:
        if required:
            raise SpecError(where, "required")
        return None
    val = data[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise SpecError(where, f"expected a finite number, got {val!r}")
    return float(val)


def _vec3(val: Any, where: str) -> tuple[float, float, float]:
    if (
        not isinstance(val, (list, tuple))
        or len(val) != 3
        or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in val)
    ):
        raise SpecError(where, f"expected a 3-vector, got {val!r}")
    v = np.asarray(val, dtype=float)
    if np.linalg.norm(v) == 0.0:
        raise SpecError(where, "zero vector")
    return tuple(map(float, _unit(v)))
