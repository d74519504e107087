"""Lagrangian fixed-point scheme for 3-D vortex patches on a periodic grid.

Vector fields are stored as ``(3, n1, n2, n3)`` arrays and matrix fields as
``(3, 3, n1, n2, n3)``.  Gradients follow ``G[i, r] = d F^i / d x_r``.  The
flow map is carried as its periodic displacement ``xi = eta - x``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..diagnostics import DiagnosticSeries
from ..krylov import CGReport, ConvergenceError, IndefiniteError, pcg
from .grid import PeriodicGrid

log = logging.getLogger(__name__)

#: Picard guard thresholds: displacement gradient and coercivity floor.
DISPLACEMENT_BOUND = 0.5
COERCIVITY_FLOOR = 0.25


class JacobianError(ValueError):
    """The deformation gradient lost orientation (``J <= 0``) somewhere."""


class CoercivityError(RuntimeError):
    """CG broke down; the coefficient lost positive-definiteness."""

    def __init__(self, message: str, node: tuple[int, int, int], eigenvalue: float):
        super().__init__(message)
        self.node = node
        self.eigenvalue = eigenvalue


class GuardError(RuntimeError):
    """The flow map left the region where the variational problem is uniformly coercive."""

    def __init__(self, message: str, displacement: float, min_eigenvalue: float):
        super().__init__(message)
        self.displacement = displacement
        self.min_eigenvalue = min_eigenvalue


class PicardError(RuntimeError):
    """The fixed-point iteration did not reach the tolerance."""

    def __init__(self, message: str, differences: list[float], factors: list[float]):
        tail = ", ".join(f"{f:.3g}" for f in factors[-8:])
        super().__init__(f"{message}; contraction factors: [{tail}]")
        self.differences = differences
        self.factors = factors


# ---------------------------------------------------------------------------
# kinematics
# ---------------------------------------------------------------------------


def time_grid(T: float, M: int) -> np.ndarray:
    if not (T > 0 and M >= 1):
        raise ValueError("need T > 0 and M >= 1")
    return np.linspace(0.0, T, M + 1)


def flow_map(v: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Trapezoidal displacement ``xi(t_m) = int_0^{t_m} v ds`` for ``v`` of shape ``(M+1, 3, ...)``.

    ``eta = x + xi``; ``xi[0]`` is exactly zero.
    """
    v = np.asarray(v, dtype=float)
    dt = np.diff(np.asarray(times, dtype=float))
    xi = np.zeros_like(v)
    for m in range(1, len(times)):
        xi[m] = xi[m - 1] + 0.5 * dt[m - 1] * (v[m - 1] + v[m])
    return xi


@dataclass
class JacobianPack:
    """``grad_eta``, ``A = grad_eta^{-1}``, ``J = det grad_eta`` and ``Acal = J A A^T``."""

    grad_eta: np.ndarray
    A: np.ndarray
    J: np.ndarray
    Acal: np.ndarray

    def min_eigenvalue(self) -> tuple[float, tuple[int, ...]]:
        """Smallest eigenvalue of ``Acal`` over nodes and the node attaining it."""
        lam = np.linalg.eigvalsh(np.moveaxis(self.Acal, (0, 1), (-2, -1)))[..., 0]
        idx = np.unravel_index(int(np.argmin(lam)), lam.shape)
        return float(lam[idx]), tuple(int(i) for i in idx)

    def displacement_norm(self) -> float:
        """``max_x ||grad_eta - I||_2`` (spectral norm per node)."""
        E = np.moveaxis(self.grad_eta, (0, 1), (-2, -1)) - np.eye(3)
        if not E.size:
            return 0.0
        lam = np.linalg.eigvalsh(np.swapaxes(E, -1, -2) @ E)[..., -1]
        return float(np.sqrt(max(float(lam.max()), 0.0)))


def jacobian_pack_from_gradient(grad_eta: np.ndarray) -> JacobianPack:
    """Pointwise 3x3 algebra on a given deformation gradient ``(3, 3, ...)``.

    Raises
    ------
    JacobianError
        If ``det grad_eta <= 0`` at any node.
    """
    G = np.asarray(grad_eta, dtype=float)
    Gm = np.moveaxis(G, (0, 1), (-2, -1))
    J = np.linalg.det(Gm)
    if np.any(J <= 0):
        idx = np.unravel_index(int(np.argmin(J)), J.shape)
        raise JacobianError(
            f"det grad eta = {J[idx]:.3e} <= 0 at node {tuple(int(i) for i in idx)}; "
            "reduce T or refine the time grid"
        )
    Am = np.linalg.inv(Gm)
    Acal = J[..., None, None] * Am @ np.swapaxes(Am, -1, -2)
    Acal = 0.5 * (Acal + np.swapaxes(Acal, -1, -2))
    return JacobianPack(G, np.moveaxis(Am, (-2, -1), (0, 1)), J, np.moveaxis(Acal, (-2, -1), (0, 1)))


def jacobian_pack(xi: np.ndarray, grid: PeriodicGrid) -> JacobianPack:
    """Jacobian data of ``eta = x + xi`` with periodic displacement ``xi``."""
    G = grid.grad(xi)
    G[0, 0] += 1.0
    G[1, 1] += 1.0
    G[2, 2] += 1.0
    return jacobian_pack_from_gradient(G)


def curl_eta(F: np.ndarray, A: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """``[curl_eta F]_i = eps_ijk dF^k/dx_r A^r_j``; the ordinary curl when ``A = I``."""
    G = grid.grad(F)
    B = (G[:, :, None] * A[None]).sum(axis=1)  # B[k, j] = dF^k/dx_r A^r_j
    return np.stack([B[2, 1] - B[1, 2], B[0, 2] - B[2, 0], B[1, 0] - B[0, 1]])


def transported_vorticity(grad_eta: np.ndarray, omega0: np.ndarray) -> np.ndarray:
    """``C^i = sum_j d eta^i/d x_j omega0^j``; vanishes wherever ``omega0`` does."""
    return (grad_eta * omega0[None]).sum(axis=1)


# ---------------------------------------------------------------------------
# variational solve
# ---------------------------------------------------------------------------


def _operator(grid: PeriodicGrid, Acal: np.ndarray):
    k = [grid.symbol(r) for r in range(3)]

    def apply(v: np.ndarray) -> np.ndarray:
        V = grid.fft(v)
        G = grid.ifft(np.stack([1j * kr * V for kr in k], axis=1))  # G[c, j]
        Q = (Acal[None] * G[:, :, None]).sum(axis=1)
        Qh = grid.fft(Q)
        return grid.ifft(-sum(1j * k[r] * Qh[:, r] for r in range(3)))

    return apply


def _poisson_preconditioner(grid: PeriodicGrid, Acal: np.ndarray):
    Abar = grid.mean(Acal)
    k = [grid.symbol(r) for r in range(3)]
    sym = sum(Abar[j, l] * k[j] * k[l] for j in range(3) for l in range(3))
    inv = np.where(grid.kernel_mask, 0.0, 1.0 / np.where(grid.kernel_mask, 1.0, sym))

    def apply(r: np.ndarray) -> np.ndarray:
        return grid.ifft(inv * grid.fft(r))

    return apply


def variational_rhs(C: np.ndarray, pack: JacobianPack, grid: PeriodicGrid) -> np.ndarray:
    """Strong form of ``phi -> int J C . curl_eta phi``: ``b^k = -d_r(J eps_ijk A^r_j C_i)``."""
    # W[k, r] = J eps_ijk A^r_j C_i = J (C x A^r)_k with A^r the r-th row of A
    W = np.stack([np.cross(C, pack.A[r], axis=0) for r in range(3)], axis=1) * pack.J
    Wh = grid.fft(W)
    return grid.ifft(-sum(1j * grid.symbol(r) * Wh[:, r] for r in range(3)))


def variational_solve(
    C: np.ndarray,
    pack: JacobianPack,
    grid: PeriodicGrid,
    tol: float = 1e-9,
    x0: np.ndarray | None = None,
    support: np.ndarray | None = None,
    maxiter: int = 500,
) -> tuple[np.ndarray, CGReport]:
    """Periodic zero-mean ``v`` with ``-d_k(Acal^{jk} d_j v) = b(C)``.

    PCG with a constant-coefficient FFT preconditioner built from the grid
    mean of ``Acal``; derivative-kernel modes are projected out so the
    output has zero mean.

    Parameters
    ----------
    support
        Boolean node mask of the plus phase.  When given, ``C`` must vanish
        identically off it (production mode); ``None`` allows global support.

    Raises
    ------
    ValueError
        If ``C`` is nonzero outside ``support``.
    CoercivityError
        If CG meets non-positive curvature; names the node of smallest
        eigenvalue of ``Acal``.
    """
    if support is not None and np.any(C[:, ~support] != 0.0):
        raise ValueError("transported vorticity is nonzero outside the plus phase")
    b = variational_rhs(C, pack, grid)
    apply = _operator(grid, pack.Acal)
    prec = _poisson_preconditioner(grid, pack.Acal)
    try:
        v, rep = pcg(apply, b, prec, x0=x0, tol=tol, maxiter=maxiter, project=grid.project_kernel)
    except IndefiniteError as exc:
        lam, node = pack.min_eigenvalue()
        raise CoercivityError(
            f"CG breakdown: smallest eigenvalue of Acal is {lam:.3e} at node {node}", node, lam
        ) from exc
    return grid.project_kernel(v), rep


# ---------------------------------------------------------------------------
# Picard iteration
# ---------------------------------------------------------------------------


@dataclass
class LagrangianState:
    """Time-discrete fields of a Picard iterate."""

    grid: PeriodicGrid
    times: np.ndarray
    v: np.ndarray  # (M+1, 3, n1, n2, n3)
    xi: np.ndarray  # eta - x
    omega0: np.ndarray
    packs: list[JacobianPack] = field(repr=False)
    differences: list[float] = field(default_factory=list)
    factors: list[float] = field(default_factory=list)
    cg_iterations: list[list[int]] = field(default_factory=list)
    converged: bool = False

    @property
    def M(self) -> int:
        return len(self.times) - 1

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def iterations(self) -> int:
        return len(self.differences)

    def eta(self, m: int) -> np.ndarray:
        return self.grid.coords + self.xi[m]

    def transported(self, m: int) -> np.ndarray:
        return transported_vorticity(self.packs[m].grad_eta, self.omega0)


def _packs(v: np.ndarray, times: np.ndarray, grid: PeriodicGrid, guard: bool):
    xi = flow_map(v, times)
    packs = []
    for m in range(len(times)):
        pack = jacobian_pack(xi[m], grid)
        if guard:
            disp = pack.displacement_norm()
            lam, node = pack.min_eigenvalue()
            if disp > DISPLACEMENT_BOUND or lam < COERCIVITY_FLOOR:
                raise GuardError(
                    f"at t={times[m]:.4g}: ||grad eta - I|| = {disp:.3f} (bound {DISPLACEMENT_BOUND}), "
                    f"min eig Acal = {lam:.3f} (floor {COERCIVITY_FLOOR}) at node {node}; "
                    "use a smaller T",
                    disp,
                    lam,
                )
        packs.append(pack)
    return xi, packs


def picard_step(
    v: np.ndarray,
    times: np.ndarray,
    omega0: np.ndarray,
    grid: PeriodicGrid,
    tol: float = 1e-9,
    support: np.ndarray | None = None,
    guard: bool = True,
) -> tuple[np.ndarray, list[int]]:
    """One application of the map ``v -> vbar``; returns ``vbar`` and CG iteration counts."""
    _, packs = _packs(v, times, grid, guard)
    out = np.empty_like(v)
    its = []
    for m, pack in enumerate(packs):
        C = transported_vorticity(pack.grad_eta, omega0)
        out[m], rep = variational_solve(C, pack, grid, tol, x0=v[m], support=support)
        its.append(rep.iterations)
    return out, its


def sup_l2(a: np.ndarray, grid: PeriodicGrid) -> float:
    """``max_m ||a[m]||_{L^2}`` over the time levels."""
    return max(grid.l2(a[m]) for m in range(a.shape[0]))


def picard_solve(
    u0: np.ndarray,
    omega0: np.ndarray,
    grid: PeriodicGrid,
    T: float,
    M: int,
    tol: float = 1e-8,
    max_iter: int = 50,
    cg_tol: float = 1e-9,
    support: np.ndarray | None = None,
    guard: bool = True,
) -> LagrangianState:
    """Iterate ``v <- Theta(v)`` from ``v^0 = u0`` held constant in time.

    Stops when the sup-in-time L2 difference of successive iterates is at
    most ``tol``.  Contraction factors (ratios of successive differences)
    are recorded on the returned state.

    Raises
    ------
    GuardError
        If a flow map iterate breaches the displacement or coercivity guard.
    PicardError
        If ``max_iter`` iterations do not reach ``tol``.
    """
    times = time_grid(T, M)
    v = np.broadcast_to(np.asarray(u0, dtype=float), (M + 1,) + np.shape(u0)).copy()
    diffs: list[float] = []
    factors: list[float] = []
    cg_its: list[list[int]] = []
    for k in range(max_iter):
        vbar, its = picard_step(v, times, omega0, grid, cg_tol, support, guard)
        d = sup_l2(vbar - v, grid)
        diffs.append(d)
        cg_its.append(its)
        if k > 0:
            factors.append(d / diffs[-2] if diffs[-2] > 0 else 0.0)
        log.debug("picard iteration %d: difference %.3e", k + 1, d)
        v = vbar
        if d <= tol:
            xi, packs = _packs(v, times, grid, guard)
            return LagrangianState(grid, times, v, xi, omega0, packs, diffs, factors, cg_its, True)
    raise PicardError(f"no convergence to {tol:g} in {max_iter} iterations", diffs, factors)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

EULER_DIAGNOSTIC_NAMES = (
    "divergence_proxy",
    "jacobian_defect",
    "cauchy_residual",
    "tangency_residual",
    "mean_transported_vorticity",
)


def _interp(grid: PeriodicGrid, field_: np.ndarray, x: np.ndarray) -> np.ndarray:
    from scipy.ndimage import map_coordinates

    idx = grid.to_index(x)
    flat = field_.reshape((-1,) + grid.n)
    return np.stack([map_coordinates(f, idx, order=3, mode="grid-wrap") for f in flat]).reshape(
        field_.shape[:-3] + (x.shape[0],)
    )


def tangency_residual(
    state: LagrangianState, m: int, points: np.ndarray, normals: np.ndarray
) -> float:
    """``max |C . n|`` on the initial surface samples pushed forward by ``eta(t_m)``.

    ``n`` is ``A^T N / |A^T N|`` at each sample, and ``C`` is evaluated at the
    Lagrangian label, which is where ``C(., t)`` lives.
    """
    if points.size == 0:
        return 0.0
    C = _interp(state.grid, state.transported(m), points)
    A = _interp(state.grid, state.packs[m].A, points)
    n = np.einsum("kip,kp->ip", A, np.asarray(normals, dtype=float).T)
    n /= np.linalg.norm(n, axis=0)
    return float(np.abs(np.einsum("ip,ip->p", C, n)).max())


def euler_diagnostics(
    state: LagrangianState,
    points: np.ndarray | None = None,
    normals: np.ndarray | None = None,
) -> DiagnosticSeries:
    """Residuals of the Euler identities at each time level.

    Series: ``divergence_proxy`` = ``||tr(A grad v)||_{L2}``;
    ``jacobian_defect`` = ``||J - 1||_inf``; ``cauchy_residual`` =
    ``||curl_eta v - grad_eta omega0||_{L2}``; ``tangency_residual`` on the
    pushed-forward surface samples; ``mean_transported_vorticity`` =
    ``|int C|``.
    """
    g = state.grid
    out = DiagnosticSeries()
    pts = np.empty((0, 3)) if points is None else np.asarray(points, dtype=float)
    nrm = np.empty((0, 3)) if normals is None else np.asarray(normals, dtype=float)
    for m, t in enumerate(state.times):
        pack = state.packs[m]
        v = state.v[m]
        Gv = g.grad(v)
        div = np.einsum("ri...,ir...->...", pack.A, Gv)
        C = transported_vorticity(pack.grad_eta, state.omega0)
        cauchy = curl_eta(v, pack.A, g) - C
        out.extend(
            float(t),
            {
                "divergence_proxy": g.l2(div),
                "jacobian_defect": float(np.abs(pack.J - 1.0).max()),
                "cauchy_residual": g.l2(cauchy),
                "tangency_residual": tangency_residual(state, m, pts, nrm),
                "mean_transported_vorticity": float(np.linalg.norm(g.integrate(C))),
            },
        )
    return out


def zero_mean_defect(v: np.ndarray, grid: PeriodicGrid) -> float:
    """``|mean v| / max(|v|)`` per time level maximum; zero for the zero field."""
    scale = float(np.abs(v).max())
    if scale == 0.0:
        return 0.0
    return float(np.abs(grid.mean(v)).max() / scale)


__all__ = [
    "COERCIVITY_FLOOR",
    "CGReport",
    "CoercivityError",
    "ConvergenceError",
    "DISPLACEMENT_BOUND",
    "EULER_DIAGNOSTIC_NAMES",
    "GuardError",
    "JacobianError",
    "JacobianPack",
    "LagrangianState",
    "PicardError",
    "curl_eta",
    "euler_diagnostics",
    "flow_map",
    "jacobian_pack",
    "jacobian_pack_from_gradient",
    "picard_solve",
    "picard_step",
    "sup_l2",
    "tangency_residual",
    "time_grid",
    "transported_vorticity",
    "variational_rhs",
    "variational_solve",
    "zero_mean_defect",
]
