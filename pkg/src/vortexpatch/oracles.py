"""Closed-form and independent-quadrature reference solutions.

None of these routines share code paths with the production solvers; they
exist so that tests compare against something computed a different way.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike
from scipy.integrate import quad
from scipy.optimize import brentq

TWO_PI = 2.0 * np.pi


# -- Rankine vortex ---------------------------------------------------------


def rankine_velocity(x: ArrayLike, radius: float = 1.0, omega: float = 1.0) -> np.ndarray:
    """Velocity of a uniform disk patch centred at the origin."""
    p = np.atleast_2d(np.asarray(x, dtype=float))
    r2 = np.sum(p * p, axis=1)
    inside = r2 <= radius * radius
    factor = np.where(inside, 0.5 * omega, 0.5 * omega * radius**2 / np.where(r2 > 0, r2, 1.0))
    u = factor[:, None] * np.column_stack([-p[:, 1], p[:, 0]])
    return u[0] if np.ndim(x) == 1 else u


def rankine_velocity_gradient(x: ArrayLike, radius: float = 1.0, omega: float = 1.0) -> np.ndarray:
    p = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros((len(p), 2, 2))
    for i, (x1, x2) in enumerate(p):
        r2 = x1 * x1 + x2 * x2
        if r2 <= radius * radius:
            out[i] = [[0.0, -0.5 * omega], [0.5 * omega, 0.0]]
        else:
            c = 0.5 * omega * radius**2 / r2**2
            out[i] = c * np.array([[2 * x1 * x2, x2 * x2 - x1 * x1], [x2 * x2 - x1 * x1, -2 * x1 * x2]])
    return out[0] if np.ndim(x) == 1 else out


def rankine_stream(x: ArrayLike, radius: float = 1.0, omega: float = 1.0) -> np.ndarray:
    """Stream function with ``Laplacian psi = omega`` in the disk, ``(omega R^2/2) log r`` outside."""
    p = np.asarray(x, dtype=float)
    r2 = np.sum(p * p, axis=-1)
    outer = 0.25 * omega * radius**2 * np.log(np.where(r2 > 0, r2, 1.0))
    inner = 0.25 * omega * (r2 - radius**2) + 0.5 * omega * radius**2 * math.log(radius)
    return np.where(r2 <= radius * radius, inner, outer)


def point_vortex_velocity(x: ArrayLike, circulation: float, center: ArrayLike = (0.0, 0.0)) -> np.ndarray:
    p = np.atleast_2d(np.asarray(x, dtype=float)) - np.asarray(center, dtype=float)
    r2 = np.sum(p * p, axis=1)
    u = circulation / TWO_PI * np.column_stack([-p[:, 1], p[:, 0]]) / r2[:, None]
    return u[0] if np.ndim(x) == 1 else u


# -- Kirchhoff ellipse --------------------------------------------------------


def kirchhoff_rate(a: float, b: float, omega: float = 1.0) -> float:
    """Rigid rotation rate ``a b omega / (a + b)^2`` of an elliptical patch."""
    return a * b * omega / (a + b) ** 2


# -- direct area quadrature for an elliptical patch --------------------------


def _ray_coefficients(p: np.ndarray, a: float, b: float, phi: np.ndarray):
    d1, d2 = np.cos(phi), np.sin(phi)
    A = d1 * d1 / a**2 + d2 * d2 / b**2
    B = 2.0 * (p[0] * d1 / a**2 + p[1] * d2 / b**2)
    C = p[0] ** 2 / a**2 + p[1] ** 2 / b**2 - 1.0
    return A, B, C


def _ray_length(p: np.ndarray, a: float, b: float, phi: float) -> float:
    A, B, C = _ray_coefficients(p, a, b, np.asarray(phi))
    disc = B * B - 4.0 * A * C
    if C < 0:
        return float((-B + math.sqrt(max(disc, 0.0))) / (2.0 * A))
    if disc <= 0 or B >= 0:
        return 0.0
    return float(math.sqrt(disc) / A)


def ellipse_patch_velocity_area(
    x: ArrayLike,
    a: float,
    b: float,
    angle: float = 0.0,
    center: ArrayLike = (0.0, 0.0),
    omega: float = 1.0,
    tol: float = 1e-12,
) -> np.ndarray:
    """Velocity from the area integral ``int K(x - y) omega dy`` over an ellipse.

    Writing ``y = x + rho (cos phi, sin phi)`` collapses the radial integral,
    leaving ``(omega / 2 pi) int (sin phi, -cos phi) L(phi) dphi`` with ``L``
    the length of the ray from ``x`` that lies inside the ellipse.  For
    exterior targets the angular integral is split at the two tangent rays.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    ca, sa = math.cos(angle), math.sin(angle)
    rot = np.array([[ca, -sa], [sa, ca]])
    out = np.zeros_like(pts)
    for idx, xi in enumerate(pts):
        p = rot.T @ (xi - np.asarray(center, dtype=float))
        inside = (p[0] / a) ** 2 + (p[1] / b) ** 2 < 1.0
        if inside:
            # smooth periodic integrand: trapezoid converges geometrically
            n = 4096
            phi = TWO_PI * np.arange(n) / n
            A, B, C = _ray_coefficients(p, a, b, phi)
            L = (-B + np.sqrt(B * B - 4 * A * C)) / (2 * A)
            v = np.array([np.sum(np.sin(phi) * L), -np.sum(np.cos(phi) * L)]) * TWO_PI / n
        else:
            lo, hi = _tangent_window(p, a, b)
            v = np.zeros(2)
            for k, trig in enumerate((math.sin, lambda t: -math.cos(t))):
                v[k], _ = quad(
                    lambda t, trig=trig: trig(t) * _ray_length(p, a, b, t),
                    lo, hi, epsabs=tol, epsrel=tol, limit=400,
                )
        # rotate back from the ellipse frame (the ray parametrization is frame-free)
        out[idx] = omega / TWO_PI * (rot @ v)
    return out[0] if np.ndim(x) == 1 else out


def _tangent_window(p: np.ndarray, a: float, b: float) -> tuple[float, float]:
    """Angular interval of rays from an exterior point that hit the ellipse."""
    center_dir = math.atan2(-p[1], -p[0])

    def disc(t: float) -> float:
        A, B, C = _ray_coefficients(p, a, b, np.asarray(t))
        return float(B * B - 4 * A * C)

    # disc > 0 at the centre direction; march outwards to bracket each tangent
    edges = []
    for sign in (-1.0, 1.0):
        step = 1e-3
        t0 = center_dir
        t1 = t0 + sign * step
        while disc(t1) > 0:
            t0, t1 = t1, t1 + sign * step
        edges.append(brentq(disc, min(t0, t1), max(t0, t1), xtol=1e-15, rtol=1e-15))
    return edges[0], edges[1]
