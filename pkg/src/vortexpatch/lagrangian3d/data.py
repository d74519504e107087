"""Initial data for 3-D patches: mollified ball and ring presets."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull

from .grid import PeriodicGrid


def smooth_step(s: np.ndarray) -> np.ndarray:
    """C-infinity step equal to 1 for ``s <= -1`` and exactly 0 for ``s >= 1``."""
    s = np.asarray(s, dtype=float)

    def psi(t: np.ndarray) -> np.ndarray:
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out

    a, b = psi(1.0 - s), psi(1.0 + s)
    return a / (a + b)


@dataclass
class Surface:
    """Triangulated closed surface with unit outward vertex normals."""

    vertices: np.ndarray  # (p, 3)
    triangles: np.ndarray  # (q, 3)
    normals: np.ndarray  # (p, 3)


@dataclass
class PatchData3D:
    """Periodic initial velocity, its vorticity and the initial interface samples.

    ``omega0`` is the mollified patch vorticity and vanishes identically off
    ``support``.  ``u0`` is its periodic Biot-Savart velocity, so
    ``curl u0`` equals ``omega0`` up to the divergence part of ``omega0``
    that the grid cannot resolve (see :meth:`curl_defect`).
    """

    grid: PeriodicGrid
    u0: np.ndarray
    omega0: np.ndarray
    surface: Surface
    support: np.ndarray
    band: float
    preset: str = ""

    def divergence(self) -> float:
        """``max |div u0|``."""
        return float(np.abs(self.grid.div(self.u0)).max())

    def curl_defect(self) -> float:
        """``||curl u0 - omega0||_{L2}``, the Cauchy residual at ``t = 0``."""
        return self.grid.l2(self.grid.curl(self.u0) - self.omega0)

    def tangency(self) -> float:
        """``max |omega0 . N|`` at surface vertices, cubic-spline interpolated."""
        from scipy.ndimage import map_coordinates

        idx = self.grid.to_index(self.surface.vertices)
        w = np.stack([map_coordinates(c, idx, order=3, mode="grid-wrap") for c in self.omega0])
        return float(np.abs(np.einsum("ip,pi->p", w, self.surface.normals)).max())

    def mean_velocity(self) -> np.ndarray:
        return self.grid.integrate(self.u0)

    def mean_vorticity(self) -> np.ndarray:
        return self.grid.integrate(self.omega0)


def biot_savart(omega: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """Periodic mean-zero ``u = curl (-Laplace)^{-1} omega``; discretely divergence-free."""
    W = grid.fft(omega)
    lap = np.where(grid.kernel_mask, 1.0, grid.laplace_symbol)
    Psi = np.where(grid.kernel_mask, 0.0, W / lap)
    k = [grid.symbol(r) for r in range(3)]
    U = np.stack(
        [
            1j * (k[1] * Psi[2] - k[2] * Psi[1]),
            1j * (k[2] * Psi[0] - k[0] * Psi[2]),
            1j * (k[0] * Psi[1] - k[1] * Psi[0]),
        ]
    )
    return grid.ifft(U)


def sphere_surface(radius: float, n_points: int = 400) -> Surface:
    i = np.arange(n_points) + 0.5
    z = 1.0 - 2.0 * i / n_points
    phi = math.pi * (1.0 + math.sqrt(5.0)) * i
    r = np.sqrt(1.0 - z * z)
    nrm = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    tri = ConvexHull(nrm).simplices
    return Surface(radius * nrm, tri, nrm)


def torus_surface(major: float, minor: float, n_major: int = 48, n_minor: int = 24) -> Surface:
    p, q = np.meshgrid(
        2 * np.pi * np.arange(n_major) / n_major, 2 * np.pi * np.arange(n_minor) / n_minor, indexing="ij"
    )
    nrm = np.stack([np.cos(q) * np.cos(p), np.cos(q) * np.sin(p), np.sin(q)], axis=-1)
    ctr = np.stack([major * np.cos(p), major * np.sin(p), np.zeros_like(p)], axis=-1)
    verts = ctr + minor * nrm
    idx = np.arange(n_major * n_minor).reshape(n_major, n_minor)
    a, b = idx, np.roll(idx, -1, axis=0)
    c, d = np.roll(a, -1, axis=1), np.roll(b, -1, axis=1)
    tri = np.concatenate([np.stack([a, b, d], -1).reshape(-1, 3), np.stack([a, d, c], -1).reshape(-1, 3)])
    return Surface(verts.reshape(-1, 3), tri, nrm.reshape(-1, 3))


def _finish(grid, omega, surface, band, preset) -> PatchData3D:
    support = np.any(omega != 0.0, axis=0)
    return PatchData3D(grid, biot_savart(omega, grid), omega, surface, support, band, preset)


def ball_patch(
    grid: PeriodicGrid, radius: float = 1.2, omega: float = 1.0, band: float | None = None
) -> PatchData3D:
    """Swirling ball ``omega0 = omega * chi(rho) (-y, x, 0)``.

    ``chi`` is a smooth step centred on the sphere ``rho = radius`` over a
    band of total width ``band`` (default three grid spacings).  The field
    is tangent to every sphere about the origin.
    """
    band = 3.0 * float(grid.spacing.max()) if band is None else float(band)
    x, y, z = grid.coords
    rho = np.sqrt(x * x + y * y + z * z)
    chi = smooth_step((rho - radius) / (0.5 * band))
    w = omega * np.stack([-y * chi, x * chi, np.zeros_like(chi)])
    return _finish(grid, w, sphere_surface(radius), band, "ball")


def ring_patch(
    grid: PeriodicGrid,
    major: float = 1.2,
    minor: float = 0.5,
    omega: float = 1.0,
    band: float | None = None,
) -> PatchData3D:
    """Vortex-ring-like torus ``omega0 = omega * chi(s) e_phi`` about the ``z`` axis.

    ``s`` is the distance to the core circle of radius ``major``; the
    smooth step ``chi`` is centred on ``s = minor``.
    """
    band = 3.0 * float(grid.spacing.max()) if band is None else float(band)
    if minor + 0.5 * band >= major:
        raise ValueError("ring tube must not reach the symmetry axis")
    x, y, z = grid.coords
    rc = np.hypot(x, y)
    s = np.hypot(rc - major, z)
    chi = smooth_step((s - minor) / (0.5 * band))
    safe = np.where(rc > 0, rc, 1.0)
    w = omega * np.stack([-y * chi / safe, x * chi / safe, np.zeros_like(chi)])
    return _finish(grid, w, torus_surface(major, minor), band, "ring")


def zero_data(grid: PeriodicGrid) -> PatchData3D:
    zeros = np.zeros((3,) + grid.n)
    empty = Surface(np.empty((0, 3)), np.empty((0, 3), dtype=int), np.empty((0, 3)))
    return PatchData3D(grid, zeros, zeros.copy(), empty, np.zeros(grid.n, dtype=bool), 0.0, "zero")


PRESETS = {"ball": ball_patch, "ring": ring_patch}


def preset(name: str, grid: PeriodicGrid, **kwargs) -> PatchData3D:
    if name == "zero":
        return zero_data(grid)
    try:
        return PRESETS[name](grid, **kwargs)
    except KeyError:
        raise ValueError(f"unknown 3-D preset {name!r}; choose from zero, {', '.join(PRESETS)}") from None
