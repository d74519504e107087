"""Biharmonic extensions of a boundary parametrization.

``Z+`` extends ``z`` into the unit disk and ``Z-`` into the annulus
``1 <= r <= R``; both are solved exactly one Fourier mode at a time.

Conventions
-----------
The perpendicular of a vector is ``(a, b)^perp = (b, -a)``, so the Neumann
datum ``d_r Z = (d_theta z)^perp`` turns the unit circle into the identity
map and gives ``det grad Z+(1, theta) = |d_theta z|^2 > 0``.

Disk modes use ``{r^|n|, r^(|n|+2)}``, which are the complex monomials
``w^n`` and ``|w|^2 w^n`` (or their conjugates for ``n < 0``).  Evaluation
and the Sobolev norms work with that polynomial form, so they are exact at
the origin and need no quadrature.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np
from numpy.typing import ArrayLike

from .contour2d import Contour, sample, sobolev_norm, winding_number

TWO_PI = 2.0 * np.pi
COND_LIMIT = 1e12


class ConditioningError(ValueError):
    """Per-mode annulus system is numerically singular."""

    def __init__(self, n: int, cond: float):
        super().__init__(f"annulus system for mode |n|={n} has condition number {cond:.3e}")
        self.mode = n
        self.cond = cond


class DomainError(ValueError):
    """Evaluation radius outside the map's domain."""


# ---------------------------------------------------------------------------
# radial bases
# ---------------------------------------------------------------------------


def _annulus_basis(m: int, R: float, r: np.ndarray, deriv: int = 0) -> np.ndarray:
    """Values (``deriv=0``) or radial derivatives (``deriv=1``) of the 4 basis functions."""
    r = np.asarray(r, dtype=float)
    lg = np.log(r)
    if m == 0:
        if deriv == 0:
            return np.stack([np.ones_like(r), r**2, lg, r**2 * lg])
        return np.stack([np.zeros_like(r), 2 * r, 1 / r, 2 * r * lg + r])
    if m == 1:
        if deriv == 0:
            return np.stack([r, r**3, 1 / r, r * lg])
        return np.stack([np.ones_like(r), 3 * r**2, -1 / r**2, lg + 1])
    s = r / R
    if deriv == 0:
        return np.stack([s**m, s ** (m + 2), r ** (-m), r ** (2 - m)])
    return np.stack(
        [m * s ** (m - 1) / R, (m + 2) * s ** (m + 1) / R, -m * r ** (-m - 1), (2 - m) * r ** (1 - m)]
    )


def _neumann_data(contour: Contour) -> np.ndarray:
    """Fourier coefficients of ``(d_theta z)^perp``, shape ``(2, 2N+1)``."""
    n = contour.modes
    x, y = contour.coeffs
    return np.stack([1j * n * y, -1j * n * x])


def _identity_modes(N: int, scale: float) -> np.ndarray:
    """Fourier coefficients of ``scale * e_r``."""
    out = np.zeros((2, 2 * N + 1), dtype=complex)
    out[0, N + 1] = out[0, N - 1] = 0.5 * scale
    out[1, N + 1] = -0.5j * scale
    out[1, N - 1] = 0.5j * scale
    return out


# ---------------------------------------------------------------------------
# map type
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BiharmonicMap:
    """Per-mode radial coefficients of a biharmonic extension.

    ``radial[c, j, i]`` is the coefficient of basis function ``i`` for
    Cartesian component ``c`` and angular mode ``n = j - N``.  The disk has
    two basis functions per mode, the annulus four.
    """

    side: Literal["disk", "annulus"]
    N: int
    radial: np.ndarray
    R: float | None = None

    def __post_init__(self) -> None:
        nb = 2 if self.side == "disk" else 4
        if self.side not in ("disk", "annulus"):
            raise ValueError(f"unknown side {self.side!r}")
        if self.radial.shape != (2, 2 * self.N + 1, nb):
            raise ValueError(f"radial coefficients must have shape (2, {2 * self.N + 1}, {nb})")
        if self.side == "annulus" and not (self.R is not None and self.R > 1):
            raise ValueError("annulus map needs R > 1")
        self.radial.setflags(write=False)

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    @property
    def r_range(self) -> tuple[float, float]:
        return (0.0, 1.0) if self.side == "disk" else (1.0, float(self.R))

    def polynomial(self) -> list["WPoly"]:
        """Disk map components as polynomials in ``w`` and ``conj(w)``."""
        if self.side != "disk":
            raise ValueError("polynomial form exists only for the disk map")
        polys = []
        for c in range(2):
            terms: dict[tuple[int, int], complex] = defaultdict(complex)
            for n, (a, b) in zip(self.modes, self.radial[c]):
                m = abs(int(n))
                if n >= 0:
                    terms[(m, 0)] += a
                    terms[(m + 1, 1)] += b
                else:
                    terms[(0, m)] += a
                    terms[(1, m + 1)] += b
            polys.append(WPoly({k: v for k, v in terms.items() if v != 0}))
        return polys


# ---------------------------------------------------------------------------
# polynomials in w, conj(w)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WPoly:
    """``sum c[p, q] w^p conj(w)^q`` on the plane (real-valued in use)."""

    terms: dict[tuple[int, int], complex]

    def __call__(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=complex)
        wc = np.conj(w)
        out = np.zeros(w.shape, dtype=complex)
        for (p, q), c in self.terms.items():
            out += c * w**p * wc**q
        return out.real

    def d_w(self) -> "WPoly":
        out: dict[tuple[int, int], complex] = defaultdict(complex)
        for (p, q), c in self.terms.items():
            if p:
                out[(p - 1, q)] += p * c
        return WPoly(dict(out))

    def d_wbar(self) -> "WPoly":
        out: dict[tuple[int, int], complex] = defaultdict(complex)
        for (p, q), c in self.terms.items():
            if q:
                out[(p, q - 1)] += q * c
        return WPoly(dict(out))

    def __add__(self, other: "WPoly") -> "WPoly":
        out: dict[tuple[int, int], complex] = defaultdict(complex, self.terms)
        for k, v in other.terms.items():
            out[k] += v
        return WPoly(dict(out))

    def scale(self, s: complex) -> "WPoly":
        return WPoly({k: s * v for k, v in self.terms.items()})

    def d_x(self) -> "WPoly":
        return self.d_w() + self.d_wbar()

    def d_y(self) -> "WPoly":
        return (self.d_w() + self.d_wbar().scale(-1)).scale(1j)

    def l2_disk_sq(self) -> float:
        """``int_D |P|^2 dA`` in closed form."""
        groups: dict[int, list[tuple[int, complex]]] = defaultdict(list)
        for (p, q), c in self.terms.items():
            if c != 0:
                groups[p - q].append((p + q, c))
        total = 0.0
        for items in groups.values():
            s = np.array([e for e, _ in items], dtype=float)
            c = np.array([v for _, v in items])
            gram = TWO_PI / (s[:, None] + s[None, :] + 2.0)
            total += float(np.real(np.conj(c) @ gram @ c))
        return total


def disk_sobolev_norm(zmap: BiharmonicMap, k: int, seminorm: bool = False) -> float:
    """``H^k(D)`` norm of the disk map, summing ``||d^alpha Z||^2`` over multi-indices ``|alpha| <= k``.

    With ``seminorm=True`` only the derivatives of order exactly ``k`` count.
    """
    total = 0.0
    for poly in zmap.polynomial():
        layer = {(0, 0): poly}
        for order in range(k + 1):
            if not seminorm or order == k:
                total += sum(p.l2_disk_sq() for p in layer.values())
            if order == k:
                break
            nxt: dict[tuple[int, int], WPoly] = {}
            for (ax, ay), p in layer.items():
                nxt.setdefault((ax + 1, ay), p.d_x())
                nxt.setdefault((ax, ay + 1), p.d_y())
            layer = nxt
    return math.sqrt(total)


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------


def solve_disk_extension(contour: Contour) -> BiharmonicMap:
    """Biharmonic ``Z+`` on the unit disk with ``Z = z`` and ``d_r Z = (d_theta z)^perp`` at ``r = 1``.

    Per mode the regular basis ``{r^m, r^(m+2)}`` gives ``a + b = d`` and
    ``m a + (m + 2) b = g``, whose determinant is 2 for every ``m``.
    """
    N = contour.N
    m = np.abs(contour.modes)
    d = contour.coeffs
    g = _neumann_data(contour)
    b = 0.5 * (g - m * d)
    a = d - b
    return BiharmonicMap("disk", N, np.stack([a, b], axis=-1))


def default_outer_radius(contour: Contour) -> float:
    pts, _ = sample(contour, max(8 * contour.N, 64))
    return 2.0 * float(np.linalg.norm(pts, axis=1).max()) + 1.0


def solve_annulus_extension(contour: Contour, R: float | None = None) -> BiharmonicMap:
    """Biharmonic ``Z-`` on ``1 <= r <= R`` matching ``z`` at ``r = 1`` and the identity at ``r = R``.

    Raises
    ------
    ValueError
        If ``R <= max |z|`` (the patch must fit inside the outer circle).
    ConditioningError
        If a per-mode 4x4 system has condition number above ``1e12``.
    """
    if R is None:
        R = default_outer_radius(contour)
    R = float(R)
    if not R > 1.0:
        raise ValueError("outer radius R must exceed 1")
    pts, _ = sample(contour, max(8 * contour.N, 64))
    zmax = float(np.linalg.norm(pts, axis=1).max())
    if R <= zmax:
        raise ValueError(f"R={R} does not enclose the contour (max|z| = {zmax:.6g})")
    N = contour.N
    d_in = contour.coeffs
    g_in = _neumann_data(contour)
    d_out = _identity_modes(N, R)
    g_out = _identity_modes(N, 1.0)
    coeffs = np.zeros((2, 2 * N + 1, 4), dtype=complex)
    for m in range(N + 1):
        mat = np.stack(
            [
                _annulus_basis(m, R, np.array(1.0)),
                _annulus_basis(m, R, np.array(1.0), 1),
                _annulus_basis(m, R, np.array(R)),
                _annulus_basis(m, R, np.array(R), 1),
            ]
        )
        cond = np.linalg.cond(mat)
        if not cond < COND_LIMIT:
            raise ConditioningError(m, cond)
        cols = [N + m] if m == 0 else [N + m, N - m]
        for j in cols:
            rhs = np.stack([d_in[:, j], g_in[:, j], d_out[:, j], g_out[:, j]])
            coeffs[:, j, :] = np.linalg.solve(mat, rhs).T
    return BiharmonicMap("annulus", N, coeffs, R)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def _check_radius(zmap: BiharmonicMap, r: np.ndarray) -> None:
    lo, hi = zmap.r_range
    tol = 1e-12 * max(1.0, hi)
    if np.any(r < lo - tol) or np.any(r > hi + tol):
        raise DomainError(f"radius outside [{lo}, {hi}] for the {zmap.side} map")


def _annulus_parts(zmap: BiharmonicMap, r: np.ndarray, theta: np.ndarray):
    """``Z``, ``d_r Z`` and ``d_theta Z`` on broadcast ``(r, theta)``, trailing axis = component."""
    shape = r.shape
    rf, tf = r.ravel(), theta.ravel()
    val = np.zeros((rf.size, 2), dtype=complex)
    dr = np.zeros_like(val)
    dth = np.zeros_like(val)
    for m in range(zmap.N + 1):
        f = _annulus_basis(m, zmap.R, rf)
        fp = _annulus_basis(m, zmap.R, rf, 1)
        for n in {m, -m}:
            e = np.exp(1j * n * tf)[:, None]
            cf = zmap.radial[:, n + zmap.N, :]
            radial_v = (cf @ f).T
            val += radial_v * e
            dr += (cf @ fp).T * e
            dth += 1j * n * radial_v * e
    return (v.real.reshape(shape + (2,)) for v in (val, dr, dth))


def evaluate(zmap: BiharmonicMap, r: ArrayLike, theta: ArrayLike) -> np.ndarray:
    """Map value at polar coordinates ``(r, theta)``; trailing axis holds ``(x, y)``."""
    r, theta = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(theta, dtype=float))
    _check_radius(zmap, r)
    if zmap.side == "disk":
        w = r * np.exp(1j * theta)
        return np.stack([p(w) for p in zmap.polynomial()], axis=-1)
    val, _, _ = _annulus_parts(zmap, r, theta)
    return val


def jacobian(zmap: BiharmonicMap, r: ArrayLike, theta: ArrayLike) -> np.ndarray:
    """Cartesian Jacobian ``grad Z[i, k] = d Z_i / d x_k``; trailing axes ``(2, 2)``."""
    r, theta = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(theta, dtype=float))
    _check_radius(zmap, r)
    if zmap.side == "disk":
        w = r * np.exp(1j * theta)
        rows = [np.stack([p.d_x()(w), p.d_y()(w)], axis=-1) for p in zmap.polynomial()]
        return np.stack(rows, axis=-2)
    _, dr, dth = _annulus_parts(zmap, r, theta)
    er = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    et = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
    return dr[..., :, None] * er[..., None, :] + (dth / r[..., None])[..., :, None] * et[..., None, :]


def radial_derivative(zmap: BiharmonicMap, r: ArrayLike, theta: ArrayLike) -> np.ndarray:
    """``d_r Z`` at ``(r, theta)``."""
    r, theta = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(theta, dtype=float))
    jac = jacobian(zmap, r, theta)
    er = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    return np.einsum("...ik,...k->...i", jac, er)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def boundary_jacobian_defect(contour: Contour, theta: ArrayLike) -> np.ndarray:
    """``det grad Z+(1, theta) - |d_theta z(theta)|^2``."""
    th = np.asarray(theta, dtype=float)
    zmap = solve_disk_extension(contour)
    det = np.linalg.det(jacobian(zmap, np.ones_like(th), th))
    metric = np.sum(contour(th, 1) ** 2, axis=-1)
    return det - metric


def injectivity_margin(
    zmap: BiharmonicMap, contour: Contour, n_theta: int | None = None, dr: float = 1e-3
) -> tuple[float, float]:
    """Largest ``eps`` with ``det grad Z+ >= alpha/2`` on ``[1 - eps, 1]``.

    ``alpha = min |d_theta z|^2`` is measured on the grid.  Returns
    ``(eps, alpha)``; ``eps`` is resolved to the radial step ``dr``.
    """
    n_theta = n_theta or max(8 * contour.N, 128)
    th = TWO_PI * np.arange(n_theta) / n_theta
    alpha = float(np.min(np.sum(contour(th, 1) ** 2, axis=-1)))
    eps = 0.0
    for k in range(1, int(round(1.0 / dr)) + 1):
        r = 1.0 - k * dr
        det = np.linalg.det(jacobian(zmap, np.full_like(th, r), th))
        if det.min() < 0.5 * alpha:
            break
        eps = k * dr
    return eps, alpha


def maps_inside(zmap: BiharmonicMap, contour: Contour, eps: float, n_theta: int = 256) -> bool:
    """Whether ``Z+(1 - eps, theta)`` lies strictly inside the curve for all samples."""
    th = TWO_PI * np.arange(n_theta) / n_theta
    pts = evaluate(zmap, np.full_like(th, 1.0 - eps), th)
    return bool(np.all(winding_number(contour, pts) == 1))


@dataclass(frozen=True)
class GainRow:
    label: str
    map_norm: float
    contour_norm: float

    @property
    def ratio(self) -> float:
        return self.map_norm / self.contour_norm


def sobolev_gain_ratio(
    contours: Iterable[Contour], k: int, labels: Sequence[str] | None = None
) -> list[GainRow]:
    """Ratios ``||Z+||_{H^k(D)} / ||z||_{H^(k-1/2)}`` for each contour."""
    if k not in (2, 3, 4):
        raise ValueError("k must be 2, 3 or 4")
    rows = []
    for i, c in enumerate(contours):
        zmap = solve_disk_extension(c)
        label = labels[i] if labels is not None else str(i)
        rows.append(GainRow(label, disk_sobolev_norm(zmap, k), sobolev_norm(c, k - 0.5)))
    return rows


def roughening_family(
    k: int,
    members: int = 10,
    amplitude: float = 0.2,
    N: int = 256,
    eps_max: float = 1.0,
    eps_min: float = 0.05,
    seed: int = 0,
) -> tuple[list[Contour], list[float]]:
    """Circles perturbed by ``sum_n n^-(k + eps) cos(n theta + phi_n)`` radially.

    ``eps`` runs geometrically from ``eps_max`` down to ``eps_min``, so the
    members approach the edge of ``H^(k-1/2)``.  Phases are drawn once from
    ``seed`` and shared by all members.
    """
    rng = np.random.default_rng(seed)
    n = np.arange(2, N // 2 + 1)
    phase = rng.uniform(0.0, TWO_PI, n.size)
    epsilons = list(np.geomspace(eps_max, eps_min, members))
    family = []
    for eps in epsilons:
        w = n ** -(k + eps)

        def radius(theta: np.ndarray, w: np.ndarray = w) -> np.ndarray:
            return 1.0 + amplitude * (np.cos(np.multiply.outer(theta, n) + phase) @ w)

        family.append(
            Contour.from_function(
                lambda t, radius=radius: radius(t)[:, None] * np.column_stack([np.cos(t), np.sin(t)]),
                N,
            )
        )
    return family, [float(e) for e in epsilons]


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def _num(x: float) -> float:
    return float(f"{x:.17g}")


def map_to_dict(zmap: BiharmonicMap) -> dict:
    rows = []
    for c in range(2):
        for n, cf in zip(zmap.modes, zmap.radial[c]):
            row = [c, int(n)]
            for v in cf:
                row += [_num(v.real), _num(v.imag)]
            rows.append(row)
    return {
        "side": zmap.side,
        "N": zmap.N,
        "R": None if zmap.R is None else _num(zmap.R),
        "coeffs": rows,
    }


def map_from_dict(data: dict) -> BiharmonicMap:
    N = int(data["N"])
    nb = 2 if data["side"] == "disk" else 4
    radial = np.zeros((2, 2 * N + 1, nb), dtype=complex)
    for row in data["coeffs"]:
        c, n, vals = int(row[0]), int(row[1]), row[2:]
        radial[c, n + N] = [complex(vals[2 * i], vals[2 * i + 1]) for i in range(nb)]
    return BiharmonicMap(data["side"], N, radial, data["R"])


def save_map(zmap: BiharmonicMap, path: str | Path) -> None:
    Path(path).write_text(json.dumps(map_to_dict(zmap), indent=1) + "\n")


def load_map(path: str | Path) -> BiharmonicMap:
    return map_from_dict(json.loads(Path(path).read_text()))


__all__ = [
    "BiharmonicMap",
    "ConditioningError",
    "DomainError",
    "GainRow",
    "WPoly",
    "boundary_jacobian_defect",
    "default_outer_radius",
    "disk_sobolev_norm",
    "evaluate",
    "injectivity_margin",
    "jacobian",
    "load_map",
    "map_from_dict",
    "map_to_dict",
    "maps_inside",
    "radial_derivative",
    "roughening_family",
    "save_map",
    "sobolev_gain_ratio",
    "solve_annulus_extension",
    "solve_disk_extension",
]
