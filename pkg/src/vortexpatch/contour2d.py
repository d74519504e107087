"""Spectral contour dynamics for a 2-D vortex patch.

The patch boundary is a band-limited closed curve

    z(theta) = sum_{|n| <= N} zhat_n exp(i n theta),   zhat_n in C^2,

and the induced velocity of a piecewise-constant vorticity field is evaluated
through the contour-integral form of the Biot-Savart law

    u(x) = -(omega_jump / 2 pi) * \\oint log|x - z(theta)| dz/dtheta dtheta,

valid for a counterclockwise boundary.  Targets on the curve use a product
quadrature that integrates the logarithmic singularity exactly in Fourier
space; targets near the curve fall back to adaptive quadrature.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import quad_vec
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist, squareform

from .diagnostics import DiagnosticSeries

log = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

TWO_PI = 2.0 * np.pi


class AliasingError(ValueError):
    """Sample grid too coarse for the band limit."""


class QuadratureError(RuntimeError):
    """Near-singular quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


class CFLError(ValueError):
    """Time step violates ``dt * max|u| < panel length``."""


class StepRejected(RuntimeError):
    """Stepped contour lost simplicity (chord-arc below threshold)."""

    def __init__(self, message: str, chord_arc: float):
        super().__init__(message)
        self.chord_arc = chord_arc


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Contour:
    """Band-limited closed curve.

    ``coeffs`` has shape ``(2, 2N+1)``; column ``j`` holds the Fourier
    coefficient of mode ``n = j - N`` for the x and y components.
    """

    coeffs: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        c = np.array(self.coeffs, dtype=np.complex128)
        if c.ndim != 2 or c.shape[0] != 2 or c.shape[1] % 2 != 1 or c.shape[1] < 3:
            raise ValueError("coeffs must have shape (2, 2N+1) with N >= 1")
        flipped = np.conj(c[:, ::-1])
        scale = max(1.0, float(np.abs(c).max()))
        if np.abs(c - flipped).max() > 1e-12 * scale:
            raise ValueError("coefficients violate realness: zhat_{-n} != conj(zhat_n)")
        c = 0.5 * (c + flipped)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "time", float(self.time))

    # -- constructors -------------------------------------------------------
    @classmethod
    def from_samples(
        cls, points: ArrayLike, N: int | None = None, time: float = 0.0
    ) -> "Contour":
        """Fit the band-``N`` trigonometric interpolant to equispaced samples."""
        p = np.asarray(points, dtype=float)
        m = p.shape[0]
        if N is None:
            N = (m - 1) // 2
        if m < 2 * N + 1:
            raise AliasingError(f"{m} samples cannot resolve band limit N={N}")
        spec = np.fft.fft(p, axis=0).T / m
        modes = np.arange(-N, N + 1)
        coeffs = spec[:, modes % m]
        if m % 2 == 0 and N == m // 2:
            coeffs[:, 0] *= 0.5
            coeffs[:, -1] *= 0.5
        return cls(coeffs, time)

    @classmethod
    def from_function(
        cls, func: Callable[[np.ndarray], np.ndarray], N: int, oversample: int = 4
    ) -> "Contour":
        """Band-limit ``func(theta) -> (m, 2)`` to ``N`` modes."""
        m = oversample * (2 * N + 1)
        theta = TWO_PI * np.arange(m) / m
        return cls.from_samples(np.asarray(func(theta)), N)

    @classmethod
    def circle(
        cls, radius: float = 1.0, center: Sequence[float] = (0.0, 0.0), N: int = 1
    ) -> "Contour":
        return cls.ellipse(radius, radius, center=center, N=N)

    @classmethod
    def ellipse(
        cls,
        a: float,
        b: float,
        angle: float = 0.0,
        center: Sequence[float] = (0.0, 0.0),
        N: int = 1,
    ) -> "Contour":
        """Ellipse with semi-axes ``a`` (rotated by ``angle``) and ``b``, counterclockwise."""
        c = np.zeros((2, 2 * N + 1), dtype=complex)
        ca, sa = math.cos(angle), math.sin(angle)
        # (a cos t, b sin t) rotated by angle
        x1 = 0.5 * a * ca - 0.5j * (-b * sa)
        y1 = 0.5 * a * sa - 0.5j * (b * ca)
        c[:, N] = center[0], center[1]
        c[:, N + 1] = x1, y1
        c[:, N - 1] = np.conj(x1), np.conj(y1)
        return cls(c)

    @classmethod
    def perturbed_circle(
        cls,
        amplitudes: dict[int, float] | Sequence[float],
        N: int | None = None,
        phases: dict[int, float] | Sequence[float] | None = None,
        radius: float = 1.0,
    ) -> "Contour":
        """Polar graph ``r(theta) = radius * (1 + sum_k eps_k cos(k theta + phi_k))``.

        The graph is not band-limited in general; it is projected onto ``N``
        modes (default: 4 times the highest perturbation wavenumber).
        """
        amps = dict(amplitudes) if isinstance(amplitudes, dict) else {
            k: a for k, a in enumerate(amplitudes) if a
        }
        if phases is None:
            ph: dict[int, float] = {}
        elif isinstance(phases, dict):
            ph = dict(phases)
        else:
            ph = dict(enumerate(phases))
        kmax = max(amps, default=1)
        if N is None:
            N = max(4 * kmax, 8)

        def f(theta: np.ndarray) -> np.ndarray:
            r = np.ones_like(theta)
            for k, eps in amps.items():
                r = r + eps * np.cos(k * theta + ph.get(k, 0.0))
            r = radius * r
            return np.column_stack([r * np.cos(theta), r * np.sin(theta)])

        return cls.from_function(f, N, oversample=8)

    # -- basic properties ---------------------------------------------------
    @property
    def N(self) -> int:
        return (self.coeffs.shape[1] - 1) // 2

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    def mode(self, n: int) -> np.ndarray:
        if abs(n) > self.N:
            return np.zeros(2, dtype=complex)
        return self.coeffs[:, n + self.N]

    def __call__(self, theta: ArrayLike, derivative: int = 0) -> np.ndarray:
        """Direct trigonometric synthesis at arbitrary angles, shape ``(..., 2)``."""
        th = np.asarray(theta, dtype=float)
        n = self.modes
        phase = np.exp(1j * np.multiply.outer(th, n)) * (1j * n) ** derivative
        return np.real(phase @ self.coeffs.T)

    # -- transformations ----------------------------------------------------
    def resized(self, N: int) -> "Contour":
        """Zero-pad or truncate to band limit ``N``."""
        c = np.zeros((2, 2 * N + 1), dtype=complex)
        k = min(N, self.N)
        c[:, N - k : N + k + 1] = self.coeffs[:, self.N - k : self.N + k + 1]
        return Contour(c, self.time)

    def reversed(self) -> "Contour":
        """Same curve traversed backwards, ``theta -> -theta``."""
        return Contour(self.coeffs[:, ::-1], self.time)

    def rotated(self, angle: float) -> "Contour":
        ca, sa = math.cos(angle), math.sin(angle)
        rot = np.array([[ca, -sa], [sa, ca]])
        return Contour(rot @ self.coeffs, self.time)

    def scaled(self, factor: float) -> "Contour":
        return Contour(factor * self.coeffs, self.time)

    def translated(self, shift: Sequence[float]) -> "Contour":
        c = self.coeffs.copy()
        c[:, self.N] += np.asarray(shift, dtype=float)
        return Contour(c, self.time)

    def shifted_parameter(self, phi: float) -> "Contour":
        """Reparametrize ``theta -> theta + phi`` (same curve)."""
        return Contour(self.coeffs * np.exp(1j * self.modes * phi), self.time)

    def with_time(self, time: float) -> "Contour":
        return replace(self, time=time)

    def is_counterclockwise(self) -> bool:
        return area(self) > 0.0

    def oriented(self) -> "Contour":
        """Counterclockwise version of this contour (canonical orientation)."""
        if area(self) < 0.0:
            log.info("clockwise contour re-oriented to counterclockwise")
            return self.reversed()
        return self


@dataclass(frozen=True)
class PatchVorticity:
    """Vorticity ``omega_plus`` inside the patch and ``omega_minus`` outside.

    A nonzero ``omega_minus`` is read as a uniform background rotation
    ``(omega_minus / 2) (-x2, x1)`` superposed on the patch with jump
    ``omega_plus - omega_minus``.
    """

    omega_plus: float = 1.0
    omega_minus: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.omega_plus) and math.isfinite(self.omega_minus)):
            raise ValueError("vorticity values must be finite")

    @property
    def jump(self) -> float:
        return self.omega_plus - self.omega_minus


# ---------------------------------------------------------------------------
# Sampling and geometric functionals
# ---------------------------------------------------------------------------


def sample(contour: Contour, m: int) -> tuple[FloatArray, FloatArray]:
    """Points ``z(theta_j)`` and tangents at ``theta_j = 2 pi j / m``."""
    N = contour.N
    if m < 2 * N + 1:
        raise AliasingError(f"grid of {m} points aliases band limit N={N} (need >= {2 * N + 1})")
    n = contour.modes
    spec = np.zeros((m, 2), dtype=complex)
    dspec = np.zeros((m, 2), dtype=complex)
    np.add.at(spec, n % m, contour.coeffs.T)
    np.add.at(dspec, n % m, (1j * n)[:, None] * contour.coeffs.T)
    pts = np.real(np.fft.ifft(spec, axis=0)) * m
    tan = np.real(np.fft.ifft(dspec, axis=0)) * m
    return pts, tan


def theta_grid(m: int) -> FloatArray:
    return TWO_PI * np.arange(m) / m


def area(contour: Contour) -> float:
    """Signed enclosed area, ``(1/2) \\oint z x dz``; positive when counterclockwise."""
    n = contour.modes
    x, y = contour.coeffs
    return float(-TWO_PI * np.sum(n * np.imag(np.conj(x) * y)))


def sobolev_norm(contour: Contour, s: float) -> float:
    """``sqrt(2 pi sum_n (1 + n^2)^s |zhat_n|^2)`` summed over both components."""
    if s < 0:
        raise ValueError("Sobolev order must be non-negative")
    n = contour.modes.astype(float)
    weights = (1.0 + n * n) ** s
    return float(math.sqrt(TWO_PI * np.sum(weights * np.sum(np.abs(contour.coeffs) ** 2, axis=0))))


def metric_min(contour: Contour, m: int | None = None) -> float:
    """``min_theta |dz/dtheta|`` on a grid of at least ``8N`` points."""
    m = m or max(8 * contour.N, 64)
    _, tan = sample(contour, m)
    return float(np.sqrt((tan**2).sum(axis=1)).min())


class ChordArcReport(NamedTuple):
    value: float
    self_intersecting: bool
    theta_pair: tuple[float, float]


@lru_cache(maxsize=16)
def _pair_layout(m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    i, j = np.triu_indices(m, k=1)
    k = j - i
    dth = TWO_PI * np.minimum(k, m - k) / m
    return i, j, dth


def chord_arc_report(contour: Contour, m: int | None = None) -> ChordArcReport:
    """Chord-arc constant on a sample grid, with the minimizing parameter pair.

    Parameter separation is measured as distance on the circle, so the
    minimum over the grid is ``min |z_i - z_j| / d_S1(theta_i, theta_j)``.
    """
    m = m or max(8 * contour.N, 16)
    m += m % 2
    pts, _ = sample(contour, m)
    scale = max(1.0, float(np.abs(pts).max()))
    i, j, dth = _pair_layout(m)
    d = pdist(pts)
    ratio = d / dth
    best = int(np.argmin(ratio))
    theta = theta_grid(m)
    pair = (float(theta[i[best]]), float(theta[j[best]]))
    if d.min() <= 1e-12 * scale:
        log.warning("self-intersection detected: coincident samples on the contour")
        return ChordArcReport(0.0, True, pair)
    return ChordArcReport(float(ratio[best]), False, pair)


def chord_arc(contour: Contour, m: int | None = None) -> float:
    """``inf |z(t1) - z(t2)| / d_S1(t1, t2)`` over a grid of at least ``8N`` points."""
    return chord_arc_report(contour, m).value


def winding_number(contour: Contour, points: ArrayLike, m: int | None = None) -> np.ndarray:
    """Winding number of the contour around each point (rounded to integers)."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    m = m or max(16 * contour.N, 256)
    pts, _ = sample(contour, m)
    rel = pts[None, :, :] - x[:, None, :]
    ang = np.arctan2(rel[..., 1], rel[..., 0])
    dang = np.diff(np.concatenate([ang, ang[:, :1]], axis=1), axis=1)
    dang = (dang + np.pi) % TWO_PI - np.pi
    return np.rint(dang.sum(axis=1) / TWO_PI).astype(int)


def hausdorff_distance(a: Contour, b: Contour, m: int | None = None) -> float:
    """Symmetric Hausdorff distance between the two curves on dense samples.

    Each sample is compared against the other curve's polyline refined to
    a sub-panel spacing, then polished by a local Newton solve, so the
    result measures the geometric distance rather than grid offsets.
    """
    m = m or max(16 * max(a.N, b.N), 256)
    return max(_directed_hausdorff(a, b, m), _directed_hausdorff(b, a, m))


def _directed_hausdorff(a: Contour, b: Contour, m: int) -> float:
    pa, _ = sample(a, m)
    theta_b = theta_grid(m)
    pb, _ = sample(b, m)
    th = theta_b[cKDTree(pb).query(pa)[1]]
    n = b.modes
    ct = b.coeffs.T
    for _ in range(8):
        e = np.exp(1j * np.multiply.outer(th, n))
        z = np.real(e @ ct)
        dz = np.real((e * (1j * n)) @ ct)
        ddz = np.real((e * (-(n * n))) @ ct)
        r = z - pa
        g = np.sum(r * dz, axis=1)
        h = np.sum(dz * dz, axis=1) + np.sum(r * ddz, axis=1)
        delta = g / np.where(np.abs(h) > 1e-300, h, 1.0)
        th = th - delta
        if np.abs(delta).max() < 1e-14:
            break
    return float(np.linalg.norm(b(th) - pa, axis=1).max())


def centroid(contour: Contour) -> np.ndarray:
    """Area centroid of the enclosed region."""
    m = 4 * contour.N + 4
    pts, tan = sample(contour, m)
    x, y = pts.T
    a = area(contour)
    # Green: int x dA = \oint x^2/2 dy,  int y dA = -\oint y^2/2 dx
    cx = np.sum(0.5 * x * x * tan[:, 1]) * TWO_PI / m / a
    cy = -np.sum(0.5 * y * y * tan[:, 0]) * TWO_PI / m / a
    return np.array([cx, cy])


def second_moments(contour: Contour) -> np.ndarray:
    """Central second moments ``[[Ixx, Ixy], [Ixy, Iyy]]`` of the enclosed region."""
    m = 6 * contour.N + 6
    pts, tan = sample(contour, m)
    c = centroid(contour)
    x, y = (pts - c).T
    w = TWO_PI / m
    ixx = np.sum(x**3 / 3.0 * tan[:, 1]) * w
    iyy = -np.sum(y**3 / 3.0 * tan[:, 0]) * w
    ixy = np.sum(0.5 * x * x * y * tan[:, 1]) * w
    return np.array([[ixx, ixy], [ixy, iyy]])


def orientation_angle(contour: Contour) -> float:
    """Angle of the major principal axis of the enclosed region, in ``(-pi/2, pi/2]``."""
    i = second_moments(contour)
    return 0.5 * math.atan2(2.0 * i[0, 1], i[0, 0] - i[1, 1])


def ellipse_deformation(contour: Contour) -> float:
    """Relative Fourier energy of ``|z - centroid|^2`` outside modes ``{0, +-2}``.

    Any linear image of ``(a cos t, b sin t)`` scores exactly zero, so the
    measure ignores rotation and Lagrangian reparametrization of an ellipse.
    """
    m = 4 * contour.N + 8
    pts, _ = sample(contour, m)
    r2 = np.sum((pts - centroid(contour)) ** 2, axis=1)
    e = np.abs(np.fft.fft(r2)) ** 2
    total = float(e.sum())
    if total == 0.0:
        return 0.0
    e[[0, 2, -2]] = 0.0
    return float(e.sum() / total)


# ---------------------------------------------------------------------------
# Biot-Savart evaluation
# ---------------------------------------------------------------------------


def _spectral_derivative(p: np.ndarray) -> np.ndarray:
    m = p.shape[0]
    k = np.fft.fftfreq(m, 1.0 / m)
    if m % 2 == 0:
        k[m // 2] = 0.0
    return np.real(np.fft.ifft(1j * k[:, None] * np.fft.fft(p, axis=0), axis=0))


@lru_cache(maxsize=8)
def _log_sine(m: int) -> np.ndarray:
    k = np.arange(m)
    row = np.log(np.abs(2.0 * np.sin(np.pi * k / m)), where=k > 0, out=np.zeros(m))
    out = row[(k[None, :] - k[:, None]) % m]
    out.setflags(write=False)
    return out


def marker_velocity(points: ArrayLike, omega_jump: float = 1.0) -> FloatArray:
    """Self-induced velocity at equispaced markers of a closed counterclockwise curve.

    The logarithmic kernel is split as
    ``log|2 sin((t - s)/2)| + log(|z(t) - z(s)| / |2 sin((t - s)/2)|)``;
    the first part is applied exactly as the Fourier multiplier ``-pi/|k|``
    and the second, smooth part by the trapezoidal rule.
    """
    p = np.asarray(points, dtype=float)
    m = p.shape[0]
    if omega_jump == 0.0:
        return np.zeros_like(p)
    dz = _spectral_derivative(p)

    k = np.abs(np.fft.fftfreq(m, 1.0 / m))
    mult = np.zeros(m)
    mult[k > 0] = -np.pi / k[k > 0]
    singular = np.real(np.fft.ifft(mult[:, None] * np.fft.fft(dz, axis=0), axis=0))

    dist = squareform(pdist(p))
    np.fill_diagonal(dist, 1.0)
    smooth = np.log(dist) - _log_sine(m)
    np.fill_diagonal(smooth, np.log(np.sqrt((dz**2).sum(axis=1))))
    regular = smooth @ dz * (TWO_PI / m)

    return -(omega_jump / TWO_PI) * (singular + regular)


def _background(x: np.ndarray, omega_minus: float) -> np.ndarray:
    return 0.5 * omega_minus * np.column_stack([-x[:, 1], x[:, 0]])


def _quad_nodes(contour: Contour, quad_nodes: int | None) -> int:
    return quad_nodes or max(8 * (2 * contour.N + 1), 256)


def _near_mask(
    contour: Contour, x: np.ndarray, m: int, near_factor: float
) -> tuple[np.ndarray, np.ndarray, float]:
    pts, _ = sample(contour, m)
    seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    panel = float(seg.max())
    d = np.linalg.norm(x[:, None, :] - pts[None, :, :], axis=2)
    nearest = np.argmin(d, axis=1)
    dmin = d[np.arange(len(x)), nearest]
    theta_star = theta_grid(m)[nearest]
    return dmin < near_factor * panel, theta_star, panel


def _adaptive(
    integrand: Callable[[float], np.ndarray], theta_star: float, scale: float, tol: float
) -> np.ndarray:
    value, err = quad_vec(
        integrand,
        theta_star - np.pi,
        theta_star + np.pi,
        epsabs=tol * scale,
        epsrel=0.0,
        points=[theta_star],
        limit=20000,
    )
    if not np.isfinite(err) or err > 10 * tol * scale:
        raise QuadratureError("near-singular boundary quadrature did not converge", float(err))
    return np.asarray(value)


def patch_velocity(
    contour: Contour,
    vort: PatchVorticity,
    x: ArrayLike,
    *,
    quad_nodes: int | None = None,
    near_factor: float = 5.0,
    tol: float = 1e-12,
) -> FloatArray:
    """Velocity induced by the patch at target point(s) ``x``.

    Far targets use the trapezoidal rule on ``quad_nodes`` points (spectrally
    accurate for the smooth periodic integrand); targets within
    ``near_factor`` panel lengths of the curve use adaptive Gauss-Kronrod
    quadrature split at the nearest boundary parameter.
    """
    c = contour.oriented()
    xx = np.asarray(x, dtype=float)
    single = xx.ndim == 1
    xx = np.atleast_2d(xx)
    out = _background(xx, vort.omega_minus)
    jump = vort.jump
    if jump == 0.0:
        return out[0] if single else out

    m = _quad_nodes(c, quad_nodes)
    pts, tan = sample(c, m)
    near, theta_star, _ = _near_mask(c, xx, m, near_factor)
    far = ~near
    if far.any():
        diff = xx[far, None, :] - pts[None, :, :]
        logd = 0.5 * np.log(np.einsum("ijk,ijk->ij", diff, diff))
        out[far] += -(jump / TWO_PI) * (logd @ tan) * (TWO_PI / m)
    scale = max(1.0, float(np.abs(pts).max()))
    for idx in np.flatnonzero(near):
        xi = xx[idx]

        def integrand(t: float, xi: np.ndarray = xi) -> np.ndarray:
            z = c(t)
            return 0.5 * math.log(float(np.dot(xi - z, xi - z))) * c(t, 1)

        out[idx] += -(jump / TWO_PI) * _adaptive(integrand, theta_star[idx], scale, tol)
    return out[0] if single else out


def velocity_gradient(
    contour: Contour,
    vort: PatchVorticity,
    x: ArrayLike,
    *,
    quad_nodes: int | None = None,
    near_factor: float = 5.0,
    tol: float = 1e-11,
) -> FloatArray:
    """``grad u[i, k] = d u_i / d x_k`` at target point(s) off the curve."""
    c = contour.oriented()
    xx = np.atleast_2d(np.asarray(x, dtype=float))
    single = np.asarray(x).ndim == 1
    out = np.zeros((len(xx), 2, 2))
    out[:, 0, 1] = -0.5 * vort.omega_minus
    out[:, 1, 0] = 0.5 * vort.omega_minus
    jump = vort.jump
    if jump != 0.0:
        m = _quad_nodes(c, quad_nodes)
        pts, tan = sample(c, m)
        near, theta_star, _ = _near_mask(c, xx, m, near_factor)
        far = ~near
        if far.any():
            diff = xx[far, None, :] - pts[None, :, :]
            r2 = np.einsum("ijk,ijk->ij", diff, diff)
            kern = diff / r2[..., None]
            out[far] += -(jump / TWO_PI) * np.einsum("li,plk->pik", tan, kern) * (TWO_PI / m)
        scale = max(1.0, float(np.abs(pts).max()))
        for idx in np.flatnonzero(near):
            xi = xx[idx]

            def integrand(t: float, xi: np.ndarray = xi) -> np.ndarray:
                r = xi - c(t)
                return np.outer(c(t, 1), r / np.dot(r, r)).ravel()

            val = _adaptive(integrand, theta_star[idx], scale, tol).reshape(2, 2)
            out[idx] += -(jump / TWO_PI) * val
    return out[0] if single else out


def velocity_gradient_sup(
    contour: Contour, vort: PatchVorticity, samples: ArrayLike, **kwargs
) -> float:
    """Largest entry magnitude of ``grad u`` over a sample cloud.

    This is a sampled surrogate for the sup norm, never a certified bound.
    """
    g = velocity_gradient(contour, vort, np.atleast_2d(samples), **kwargs)
    return float(np.abs(g).max()) if g.size else 0.0


def default_gradient_samples(contour: Contour, m: int = 16) -> FloatArray:
    """Sample cloud of scaled copies of the boundary about its centroid.

    Points closer to the boundary than a tenth of its size are discarded.
    """
    c0 = centroid(contour.oriented())
    pts, _ = sample(contour, max(m, 2 * contour.N + 1))
    cloud = np.concatenate([c0 + s * (pts - c0) for s in (0.0, 0.3, 0.6, 1.5, 2.0)])
    ref, _ = sample(contour, max(16 * contour.N, 256))
    size = float(np.linalg.norm(ref - c0, axis=1).max())
    d = np.linalg.norm(cloud[:, None, :] - ref[None, :, :], axis=2).min(axis=1)
    return cloud[d > 0.1 * size]


# ---------------------------------------------------------------------------
# Time stepping
# ---------------------------------------------------------------------------


def default_markers(N: int) -> int:
    """Marker count for which keeping ``|n| <= N`` is the 2/3 de-aliasing rule."""
    m = 3 * N + 3
    return m + m % 2


def step(
    contour: Contour,
    vort: PatchVorticity,
    dt: float,
    *,
    n_markers: int | None = None,
    min_chord_arc: float = 1e-6,
    check_chord_arc: bool = True,
) -> Contour:
    """One classical RK4 step of the markers, re-projected onto the band limit."""
    if not (dt > 0 and math.isfinite(dt)):
        raise ValueError("dt must be positive and finite")
    c = contour.oriented()
    N = c.N
    m = n_markers or default_markers(N)
    x0, _ = sample(c, m)
    jump, om = vort.jump, vort.omega_minus

    def vel(p: np.ndarray) -> np.ndarray:
        return marker_velocity(p, jump) + _background(p, om)

    k1 = vel(x0)
    panel = float(np.linalg.norm(np.roll(x0, -1, axis=0) - x0, axis=1).min())
    umax = float(np.linalg.norm(k1, axis=1).max())
    if dt * umax >= panel:
        raise CFLError(f"dt*max|u| = {dt * umax:.3e} >= panel length {panel:.3e}")
    k2 = vel(x0 + 0.5 * dt * k1)
    k3 = vel(x0 + 0.5 * dt * k2)
    k4 = vel(x0 + dt * k3)
    disp = (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    spec = np.fft.fft(disp, axis=0).T / m
    delta = spec[:, c.modes % m]
    new = Contour(c.coeffs + delta, c.time + dt)
    if check_chord_arc:
        rep = chord_arc_report(new)
        if rep.value < min_chord_arc:
            raise StepRejected(
                f"chord-arc {rep.value:.3e} below threshold {min_chord_arc:.3e}", rep.value
            )
    return new


def cfl_dt(contour: Contour, vort: PatchVorticity, safety: float = 0.5,
           n_markers: int | None = None) -> float:
    """Largest step allowed by the guard, scaled by ``safety``."""
    c = contour.oriented()
    m = n_markers or default_markers(c.N)
    x0, _ = sample(c, m)
    u = marker_velocity(x0, vort.jump) + _background(x0, vort.omega_minus)
    panel = float(np.linalg.norm(np.roll(x0, -1, axis=0) - x0, axis=1).min())
    umax = float(np.linalg.norm(u, axis=1).max())
    return math.inf if umax == 0 else safety * panel / umax


@dataclass
class EvolutionResult:
    contour: Contour
    diagnostics: DiagnosticSeries
    snapshots: list[Contour] = field(default_factory=list)


F_MONITOR_NAMES = ("inverse_chord_arc", "contour_sobolev_norm", "velocity_gradient_sup")


def monitor(
    contour: Contour,
    vort: PatchVorticity,
    k: int = 4,
    samples: ArrayLike | None = None,
) -> dict[str, float]:
    """The three summands of the ``F(t)`` bound, keyed by ``F_MONITOR_NAMES``."""
    ca = chord_arc(contour)
    pts = default_gradient_samples(contour) if samples is None else samples
    return {
        "inverse_chord_arc": math.inf if ca == 0 else 1.0 / ca,
        "contour_sobolev_norm": sobolev_norm(contour, k - 0.5),
        "velocity_gradient_sup": velocity_gradient_sup(contour, vort, pts),
    }


def evolve(
    contour: Contour,
    vort: PatchVorticity,
    dt: float,
    t_end: float,
    *,
    monitor_every: int = 0,
    snapshot_every: int = 0,
    k: int = 4,
    grad_samples: ArrayLike | None = None,
    **step_kwargs,
) -> EvolutionResult:
    """Advance to ``t_end`` with fixed steps (the last one shortened if needed)."""
    diag = DiagnosticSeries()
    c = contour.oriented()
    snaps = [c] if snapshot_every else []
    if monitor_every:
        diag.extend(c.time, monitor(c, vort, k, grad_samples))
    t_final = c.time + t_end
    i = 0
    while c.time < t_final - 1e-12 * max(1.0, abs(t_final)):
        h = min(dt, t_final - c.time)
        c = step(c, vort, h, **step_kwargs)
        i += 1
        if monitor_every and i % monitor_every == 0:
            diag.extend(c.time, monitor(c, vort, k, grad_samples))
        if snapshot_every and i % snapshot_every == 0:
            snaps.append(c)
    return EvolutionResult(c, diag, snaps)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def _num(x: float) -> float:
    return float(f"{x:.17g}")


def contour_to_dict(contour: Contour) -> dict:
    rows = [
        [int(n), _num(zx.real), _num(zx.imag), _num(zy.real), _num(zy.imag)]
        for n, zx, zy in zip(contour.modes, *contour.coeffs)
    ]
    return {"N": contour.N, "time": _num(contour.time), "coeffs": rows}


def contour_from_dict(data: dict) -> Contour:
    N = int(data["N"])
    c = np.zeros((2, 2 * N + 1), dtype=complex)
    for n, xr, xi, yr, yi in data["coeffs"]:
        c[:, int(n) + N] = complex(xr, xi), complex(yr, yi)
    return Contour(c, float(data["time"]))


def save_checkpoint(contour: Contour, path: str | Path) -> None:
    Path(path).write_text(json.dumps(contour_to_dict(contour), indent=1) + "\n")


def load_checkpoint(path: str | Path) -> Contour:
    return contour_from_dict(json.loads(Path(path).read_text()))
