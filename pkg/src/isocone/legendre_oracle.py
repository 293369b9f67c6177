"""One-dimensional reference values for Neumann eigenvalues of polar caps.

Separating u = f(theta) cos(m phi) on the cap {colatitude < aperture} gives
the associated Legendre equation

    f'' + cot(theta) f' + (lambda - m^2 / sin^2 theta) f = 0,

regular at the pole, with the Neumann condition f'(aperture) = 0. The
eigenvalue is located by shooting from the pole and bracketing sign changes
of f'(aperture; lambda). None of this touches the finite element code, which
is the point: it is the independent check for the 2D solver.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

THETA_START = 1e-3


def _start(lam: float, m: int) -> tuple[float, float]:
    # Frobenius series f = t^m (1 + a t^2) about the regular singular point
    a = (m * (m + 1) / 3.0 - lam) / (4.0 * (m + 1))
    t = THETA_START
    f = t**m * (1.0 + a * t * t)
    df = m * t ** (m - 1) * (1.0 + a * t * t) + 2.0 * a * t ** (m + 1) if m > 0 else 2.0 * a * t
    return f, df


def neumann_slope(lam: float, aperture: float, m: int, rtol: float = 1e-12) -> float:
    """f'(aperture) for the regular solution normalized by f ~ theta^m at 0."""

    def rhs(theta, y):
        s = math.sin(theta)
        return [y[1], -math.cos(theta) / s * y[1] + (m * m / (s * s) - lam) * y[0]]

    sol = solve_ivp(
        rhs,
        (THETA_START, aperture),
        list(_start(lam, m)),
        method="DOP853",
        rtol=rtol,
        atol=rtol * 1e-2,
    )
    return float(sol.y[1, -1])


@lru_cache(maxsize=256)
def cap_eigenvalue(aperture: float, m: int = 1, index: int = 0) -> float:
    """Spectral Neumann eigenvalue lambda for azimuthal order ``m``.

    ``index`` counts positive roots (0 = smallest). For m = 0 the constant
    mode at lambda = 0 is skipped. Roots are bracketed on a grid in
    sqrt(lambda) with stride well below the root spacing (~ pi / aperture),
    then polished with Brent's method at full tolerance.
    """
    if not 0.0 < aperture < math.pi:
        raise ValueError(f"aperture must lie in (0, pi), got {aperture}")
    stride = 0.1 / aperture
    k_lo = 1e-3
    f_lo = neumann_slope(k_lo**2, aperture, m, rtol=1e-9)
    found = 0
    for _ in range(10000):
        k_hi = k_lo + stride
        f_hi = neumann_slope(k_hi**2, aperture, m, rtol=1e-9)
        if f_lo * f_hi < 0.0:
            if found == index:
                return brentq(neumann_slope, k_lo**2, k_hi**2, args=(aperture, m), xtol=1e-14, rtol=1e-14)
            found += 1
        k_lo, f_lo = k_hi, f_hi
    raise RuntimeError(f"no eigenvalue found for m={m}, index={index}")


def cap_mu1(aperture: float) -> float:
    """Ratio-scale first nonzero Neumann eigenvalue sqrt(lambda) of a polar cap.

    Takes the minimum over the m = 0, 1, 2 branches, so the claim that the
    m = 1 branch carries the first eigenvalue is checked rather than assumed.
    """
    lam = min(cap_eigenvalue(aperture, m) for m in (0, 1, 2))
    return math.sqrt(lam)
