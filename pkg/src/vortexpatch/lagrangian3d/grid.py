"""Uniform periodic grids on ``[-l, l)^3`` with Fourier-multiplier derivatives."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np

Method = Literal["spectral", "fd4"]


@dataclass(frozen=True)
class PeriodicGrid:
    """Cell-vertex grid with ``n`` points per direction on ``[-half_length, half_length)``.

    First derivatives are Fourier multipliers: the exact wavenumber
    (``spectral``) or the symbol of the fourth-order central difference
    (``fd4``).  The Nyquist wavenumber is zeroed in both cases, so every
    derivative matrix is real and skew-symmetric.
    """

    n: tuple[int, int, int]
    half_length: float = math.pi
    method: Method = "spectral"

    def __post_init__(self) -> None:
        n = tuple(int(k) for k in (self.n if np.ndim(self.n) else (self.n,) * 3))
        if len(n) != 3 or any(k < 4 or k % 2 for k in n):
            raise ValueError("grid needs three even sizes >= 4")
        object.__setattr__(self, "n", n)
        if self.method not in ("spectral", "fd4"):
            raise ValueError(f"unknown derivative method {self.method!r}")

    @classmethod
    def cube(cls, n: int, half_length: float = math.pi, method: Method = "spectral") -> "PeriodicGrid":
        return cls((n, n, n), half_length, method)

    @property
    def spacing(self) -> np.ndarray:
        return 2.0 * self.half_length / np.asarray(self.n, dtype=float)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return (2.0 * self.half_length) ** 3

    @cached_property
    def axes(self) -> list[np.ndarray]:
        return [-self.half_length + h * np.arange(k) for h, k in zip(self.spacing, self.n)]

    @cached_property
    def coords(self) -> np.ndarray:
        """``(3, n1, n2, n3)`` node coordinates."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def _symbols(self) -> list[np.ndarray]:
        """Derivative symbols (real part of ``i k``) broadcast to the rfft layout."""
        out = []
        for ax, (k_n, h) in enumerate(zip(self.n, self.spacing)):
            if ax < 2:
                m = np.fft.fftfreq(k_n, 1.0 / k_n)
            else:
                m = np.fft.rfftfreq(k_n, 1.0 / k_n)
            k = m * (2 * np.pi / (k_n * h))
            if self.method == "fd4":
                k = (8 * np.sin(k * h) - np.sin(2 * k * h)) / (6 * h)
            k = np.where(np.abs(m) == k_n // 2, 0.0, k)
            shape = [1, 1, 1]
            shape[ax] = -1
            out.append(k.reshape(shape))
        return out

    @cached_property
    def kernel_mask(self) -> np.ndarray:
        """rfft-layout mask of modes annihilated by every derivative (mean and Nyquist corners)."""
        k1, k2, k3 = self._symbols
        return (k1 == 0) & (k2 == 0) & (k3 == 0)

    @cached_property
    def laplace_symbol(self) -> np.ndarray:
        k1, k2, k3 = self._symbols
        return k1**2 + k2**2 + k3**2

    # -- transforms -----------------------------------------------------------
    def fft(self, f: np.ndarray) -> np.ndarray:
        return np.fft.rfftn(f, axes=(-3, -2, -1))

    def ifft(self, F: np.ndarray) -> np.ndarray:
        return np.fft.irfftn(F, s=self.n, axes=(-3, -2, -1))

    def symbol(self, axis: int) -> np.ndarray:
        return self._symbols[axis]

    # -- derivatives ----------------------------------------------------------
    def deriv(self, f: np.ndarray, axis: int) -> np.ndarray:
        return self.ifft(1j * self._symbols[axis] * self.fft(f))

    def grad(self, f: np.ndarray) -> np.ndarray:
        """Gradient along a new second-to-... axis: ``f (..., n) -> (..., 3, n)``.

        For a vector field ``F`` of shape ``(3, n1, n2, n3)`` the result ``G``
        has ``G[i, r] = d F^i / d x_r``.
        """
        F = self.fft(f)
        return np.stack([self.ifft(1j * k * F) for k in self._symbols], axis=-4)

    def div(self, F: np.ndarray) -> np.ndarray:
        spec = sum(1j * self._symbols[r] * self.fft(F[r]) for r in range(3))
        return self.ifft(spec)

    def curl(self, F: np.ndarray) -> np.ndarray:
        G = self.grad(F)
        return np.stack([G[2, 1] - G[1, 2], G[0, 2] - G[2, 0], G[1, 0] - G[0, 1]])

    def project_kernel(self, f: np.ndarray) -> np.ndarray:
        """Remove the derivative kernel (mean and Nyquist-corner modes)."""
        F = self.fft(f)
        F[..., self.kernel_mask] = 0.0
        return self.ifft(F)

    # -- reductions -----------------------------------------------------------
    def integrate(self, f: np.ndarray) -> np.ndarray:
        return f.sum(axis=(-3, -2, -1)) * self.cell_volume

    def mean(self, f: np.ndarray) -> np.ndarray:
        return f.mean(axis=(-3, -2, -1))

    def l2(self, f: np.ndarray) -> float:
        return float(math.sqrt(np.sum(f * f) * self.cell_volume))

    def to_index(self, x: np.ndarray) -> np.ndarray:
        """Fractional grid indices of physical points ``x`` with shape ``(p, 3)``."""
        return ((np.asarray(x) + self.half_length) / self.spacing).T


@dataclass
class PeriodicField3D:
    """Grid values with a leading component shape: ``()`` scalar, ``(3,)`` vector, ``(3, 3)`` matrix."""

    grid: PeriodicGrid
    values: np.ndarray
    name: str = ""
    components: tuple[int, ...] = field(init=False)

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.shape[-3:] != self.grid.n:
            raise ValueError(f"values shape {v.shape} does not end with grid shape {self.grid.n}")
        if v.shape[:-3] not in ((), (3,), (3, 3)):
            raise ValueError("component shape must be (), (3,) or (3, 3)")
        self.values = v
        self.components = v.shape[:-3]
