"""Two-phase elliptic interface problems.

Weak form: find ``u`` with prescribed outer data such that

    int a^{jk} d_k u d_j phi dx = int f phi dx + int_Gamma g phi dS

for all test functions ``phi``.  Jumps are ``[[q]] = q+ - q-`` with ``N``
the outward normal of the patch, so ``g`` is the flux jump
``[[a^{jk} d_k u N_j]]`` of a phase-wise solution of
``-d_j(a^{jk} d_k u) = f``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
import scipy.sparse as sp

from ..contour2d import Contour, PatchVorticity, area, centroid
from ..krylov import CGReport, ConvergenceError, IndefiniteError, pcg
from . import fem
from .fem import FESpace, Geometry
from .mesh import InterfaceMesh

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
Field = Callable[[np.ndarray], np.ndarray] | float | None


class PositivityError(ValueError):
    """Coefficient or assembled operator is not positive definite."""


class CompatibilityError(ValueError):
    """Periodic problem with forcing that does not integrate to zero."""


class OrientationError(RuntimeError):
    """Measured curl jump has the wrong sign for the prescribed tangent."""


@dataclass(frozen=True)
class TwoPhaseProblem:
    """Coefficients, forcing and interface datum of a two-phase problem.

    Callables take points of shape ``(..., 2)``.  ``g`` also receives the
    contour parameter: ``g(x, theta)``.  Coefficients return ``(..., 2, 2)``;
    ``None`` means the identity.  ``dirichlet`` sets the outer-ball values
    and is ignored on periodic meshes.  ``flux_plus``/``flux_minus`` add a
    weak-form load ``int F . grad phi`` with ``F(x)`` of shape
    ``(..., ncomp, 2)``, which allows loads given only in weak form.
    """

    f_plus: Field = 0.0
    f_minus: Field = 0.0
    g: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    a_plus: Callable[[np.ndarray], np.ndarray] | None = None
    a_minus: Callable[[np.ndarray], np.ndarray] | None = None
    dirichlet: Field = 0.0
    ncomp: int = 1
    flux_plus: Callable[[np.ndarray], np.ndarray] | None = None
    flux_minus: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""


@dataclass
class SolverReport:
    iterations: list[int]
    residuals: list[float]
    histories: list[list[float]] = field(repr=False)
    positivity: float
    ndof: int


@dataclass
class TwoPhaseSolution:
    """Nodal field on an FE space; ``values`` has shape ``(ndof, ncomp)``."""

    space: FESpace
    values: np.ndarray
    report: SolverReport

    @property
    def mesh(self) -> InterfaceMesh:
        return self.space.mesh

    @property
    def ncomp(self) -> int:
        return self.values.shape[1]

    def phase_values(self, phase: int) -> np.ndarray:
        """Restriction ``u+`` (``phase=1``) or ``u-`` (``phase=-1``) to that phase's dofs."""
        return self.values[self.space.phase_dofs[phase]]

    def _element_eval(self, t: np.ndarray, x: np.ndarray, grad: bool) -> np.ndarray:
        sp_ = self.space
        xi = sp_.reference_coords(t, x)
        N, dN = fem.shape_functions(sp_.degree, xi)
        U = self.values[sp_.element_dofs[t]]  # (p, nloc, c)
        if not grad:
            return np.einsum("pa,pac->pc", N, U)
        X = sp_.dof_coords[sp_.element_dofs[t]]
        J = np.einsum("pai,pak->pik", X, dN)
        inv = np.linalg.inv(J)
        G = np.einsum("pak,pki->pai", dN, inv)
        return np.einsum("pai,pac->pci", G, U)

    def evaluate(self, x: np.ndarray, phase: int | None = None) -> np.ndarray:
        """Field values at points, shape ``(p, ncomp)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = self.space.locate(x, phase)
        return self._element_eval(t, x, grad=False)

    def gradient(self, x: np.ndarray, phase: int | None = None) -> np.ndarray:
        """Element gradients at points, shape ``(p, ncomp, 2)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = self.space.locate(x, phase)
        return self._element_eval(t, x, grad=True)


# ---------------------------------------------------------------------------
# core solve
# ---------------------------------------------------------------------------


def _preconditioner(K: sp.csr_matrix, kind: str):
    if kind == "jacobi":
        d = K.diagonal()
        return lambda r: r / d
    if kind == "amg":
        import pyamg

        ml = pyamg.smoothed_aggregation_solver(K.tocsr())
        M = ml.aspreconditioner()
        return lambda r: M @ r
    if kind == "none":
        return None
    raise ValueError(f"unknown preconditioner {kind!r}")


def positivity_bound(space: FESpace, problem: TwoPhaseProblem, geom: Geometry | None = None) -> float:
    """Smallest eigenvalue of ``sym(a)`` over all quadrature points."""
    geom = geom or space.geometry()
    a = fem.coefficient_at(space, geom, problem.a_plus, problem.a_minus)
    sym = 0.5 * (a + np.swapaxes(a, -1, -2))
    return float(np.linalg.eigvalsh(sym)[..., 0].min())


def solve_weak(
    problem: TwoPhaseProblem,
    mesh: InterfaceMesh,
    degree: int = 1,
    *,
    tol: float = 1e-10,
    preconditioner: Literal["jacobi", "amg", "none"] = "jacobi",
    compat_tol: float = 1e-2,
) -> TwoPhaseSolution:
    """Galerkin solution of the two-phase problem on ``mesh``.

    Raises
    ------
    PositivityError
        If the coefficient fails the pointwise positivity test or CG detects
        an indefinite operator.
    CompatibilityError
        On a periodic mesh whose load does not integrate to (nearly) zero.
    ConvergenceError
        If CG stalls; the residual history is attached.
    """
    space = FESpace(mesh, degree)
    geom = space.geometry()
    a = fem.coefficient_at(space, geom, problem.a_plus, problem.a_minus)
    lam = float(np.linalg.eigvalsh(0.5 * (a + np.swapaxes(a, -1, -2)))[..., 0].min())
    if not lam > 0:
        raise PositivityError(f"coefficient not positive definite: min eigenvalue {lam:.3e}")
    K = fem.assemble_stiffness(space, a, geom)
    nc = problem.ncomp
    b = fem.assemble_load(space, geom, problem.f_plus, problem.f_minus, nc)
    b += fem.assemble_interface(space, problem.g, nc)
    if problem.flux_plus is not None or problem.flux_minus is not None:
        b += fem.assemble_flux_load(space, geom, problem.flux_plus, problem.flux_minus, nc)

    master = space.master
    reps = np.unique(master)
    u = np.zeros((space.ndof, nc))
    if mesh.is_periodic:
        free = reps
        total = b[free].sum(axis=0)
        scale = np.abs(b[free]).sum(axis=0) + 1e-300
        if np.any(np.abs(total) > compat_tol * scale):
            raise CompatibilityError(
                f"periodic load integrates to {total} (relative {np.abs(total / scale).max():.2e})"
            )
        fixed = np.zeros(0, dtype=int)
    else:
        fixed = space.boundary_dofs
        free = np.setdiff1d(reps, fixed)
        u[fixed] = fem._eval_field(problem.dirichlet, space.dof_coords[fixed], nc)

    Kff = K[free][:, free].tocsr()
    rhs = b[free] - K[free][:, fixed] @ u[fixed]
    prec = _preconditioner(Kff, preconditioner)
    project = None
    if mesh.is_periodic:
        ones = np.ones(len(free)) / math.sqrt(len(free))
        project = lambda v: v - ones * (ones @ v)  # noqa: E731

    iters, res, hist = [], [], []
    for c in range(nc):
        try:
            x, rep = pcg(lambda v: Kff @ v, rhs[:, c], prec, tol=tol, project=project,
                         maxiter=20 * len(free) + 100)
        except IndefiniteError as exc:
            raise PositivityError(f"assembled operator is not positive definite: {exc}") from exc
        u[free, c] = x
        iters.append(rep.iterations)
        res.append(float(np.linalg.norm(Kff @ x - (project(rhs[:, c]) if project else rhs[:, c]))
                         / max(np.linalg.norm(rhs[:, c]), 1e-300)))
        hist.append(rep.history)
    u = u[master]
    if mesh.is_periodic:
        M = fem.assemble_mass(space, geom)
        vol = float(mesh.triangle_areas().sum())
        ones_full = np.ones(space.ndof)
        ones_full[master != np.arange(space.ndof)] = 0.0
        mean = (ones_full @ (M @ u)) / vol
        u = u - mean
    report = SolverReport(iters, res, hist, lam, len(free))
    return TwoPhaseSolution(space, u, report)


# ---------------------------------------------------------------------------
# patch problems
# ---------------------------------------------------------------------------


def _circulation_center(contour: Contour, vort: PatchVorticity) -> tuple[float, np.ndarray]:
    return vort.jump * area(contour), centroid(contour)


def solve_stream_2d(
    contour: Contour,
    mesh: InterfaceMesh,
    vort: PatchVorticity = PatchVorticity(),
    degree: int = 1,
    **kwargs,
) -> TwoPhaseSolution:
    """Stream function: ``Laplacian psi = omega`` phase-wise, ``psi`` and ``d_N psi`` continuous.

    On the outer ball ``psi`` is set to the equivalent point vortex
    ``(Gamma / 2 pi) log|x - c|`` plus the background rotation
    ``omega_minus |x|^2 / 4``.
    """
    c = contour.oriented()
    gamma, c0 = _circulation_center(c, vort)

    def outer(x: np.ndarray) -> np.ndarray:
        r2 = np.sum((x - c0) ** 2, axis=-1)
        return gamma / (2 * TWO_PI) * np.log(r2) + 0.25 * vort.omega_minus * np.sum(x * x, axis=-1)

    problem = TwoPhaseProblem(
        f_plus=-vort.omega_plus,
        f_minus=-vort.omega_minus,
        dirichlet=outer,
        name="stream",
    )
    return solve_weak(problem, mesh, degree, **kwargs)


def stream_velocity(solution: TwoPhaseSolution, x: np.ndarray) -> np.ndarray:
    """``u = grad^perp psi = (-d_2 psi, d_1 psi)`` from the discrete stream function."""
    g = solution.gradient(x)[:, 0, :]
    return np.column_stack([-g[:, 1], g[:, 0]])


def solve_velocity_2d(
    contour: Contour,
    mesh: InterfaceMesh,
    vort: PatchVorticity = PatchVorticity(),
    degree: int = 1,
    check_orientation: bool = True,
    **kwargs,
) -> TwoPhaseSolution:
    """Velocity as a vector two-phase problem: harmonic per phase, ``[[d_N u]] = -omega tau``.

    ``tau = (N_2, -N_1)`` is the clockwise unit tangent, so the interface
    datum is ``omega`` times the counterclockwise tangent.  Outer values come
    from the equivalent point vortex plus the background rotation.

    Raises
    ------
    OrientationError
        If the measured ``[[d_N u . tau]]`` does not have the sign of
        ``-omega_jump``.
    """
    c = contour.oriented()
    gamma, c0 = _circulation_center(c, vort)
    jump = vort.jump

    def g(x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        t = c(theta, 1)
        t = t / np.linalg.norm(t, axis=-1, keepdims=True)
        return jump * t

    def outer(x: np.ndarray) -> np.ndarray:
        d = x - c0
        r2 = np.sum(d * d, axis=-1, keepdims=True)
        pv = gamma / TWO_PI * np.stack([-d[..., 1], d[..., 0]], axis=-1) / r2
        bg = 0.5 * vort.omega_minus * np.stack([-x[..., 1], x[..., 0]], axis=-1)
        return pv + bg

    problem = TwoPhaseProblem(g=g, dirichlet=outer, ncomp=2, name="velocity")
    sol = solve_weak(problem, mesh, degree, **kwargs)
    if check_orientation and jump != 0.0:
        samples = measure_interface_jump(sol, "normal-derivative")
        curl_jump = float(np.sum(samples.lengths * samples.tangential()) / samples.lengths.sum())
        if curl_jump * (-jump) <= 0:
            raise OrientationError(
                f"measured [[d_N u . tau]] = {curl_jump:.4g} has the wrong sign (expected {-jump:g})"
            )
    return sol


# ---------------------------------------------------------------------------
# interface post-processing
# ---------------------------------------------------------------------------


@dataclass
class JumpSamples:
    """Per-edge jump samples at interface edge midpoints."""

    quantity: str
    x: np.ndarray
    theta: np.ndarray
    normals: np.ndarray
    lengths: np.ndarray
    values: np.ndarray  # (ne, ncomp)

    @property
    def tangents(self) -> np.ndarray:
        """Clockwise tangent ``tau = (N_2, -N_1)``."""
        return np.column_stack([self.normals[:, 1], -self.normals[:, 0]])

    def tangential(self) -> np.ndarray:
        """``jump . tau`` for vector-valued samples."""
        return np.sum(self.values * self.tangents, axis=1)

    def l2_distance(self, target: np.ndarray) -> float:
        """``L^2(Gamma)`` distance to per-edge target values."""
        diff = self.values - np.asarray(target).reshape(self.values.shape)
        return float(math.sqrt(np.sum(self.lengths[:, None] * diff**2)))


def _patch_gradients(sol: TwoPhaseSolution, phase: int, x_mid: np.ndarray) -> np.ndarray:
    """Area-weighted average of one phase's element gradients around each edge."""
    sp_ = sol.space
    mesh = sol.mesh
    tri = mesh.triangles
    edges = mesh.interface_edges
    nv = len(mesh.vertices)
    touching: list[list[int]] = [[] for _ in range(nv)]
    for t in np.flatnonzero(mesh.tags == phase):
        for v in tri[t]:
            touching[v].append(t)
    areas = mesh.triangle_areas()
    out = np.zeros((len(edges), sol.ncomp, 2))
    for k, (a, b) in enumerate(edges):
        ts = np.array(sorted(set(touching[a]) | set(touching[b])))
        pts = np.repeat(x_mid[k : k + 1], len(ts), axis=0)
        G = sol._element_eval(ts, pts, grad=True)
        w = areas[ts] / areas[ts].sum()
        out[k] = np.einsum("t,tci->ci", w, G)
    return out


def measure_interface_jump(
    solution: TwoPhaseSolution,
    quantity: Literal["value", "normal-derivative", "flux"] = "normal-derivative",
    a_plus: Callable[[np.ndarray], np.ndarray] | None = None,
    a_minus: Callable[[np.ndarray], np.ndarray] | None = None,
) -> JumpSamples:
    """Jump ``q+ - q-`` across each interface edge, sampled at the edge midpoint.

    Values use the shared edge trace (identically zero for a conforming
    field).  Derivatives use one-sided element gradients averaged over the
    patch of same-phase elements touching the edge.
    """
    sp_ = solution.space
    mesh = solution.mesh
    th = mesh.edge_theta.mean(axis=1)
    e = mesh.interface_edges
    x_mid = sp_.dof_coords[sp_.interface_edge_dofs[:, 2]] if sp_.degree == 2 else 0.5 * (
        mesh.vertices[e[:, 0]] + mesh.vertices[e[:, 1]]
    )
    normals = mesh.edge_normals
    lengths = mesh.edge_lengths()
    if quantity == "value":
        N, _ = fem.edge_shape_functions(sp_.degree, np.array([0.5]))
        U = solution.values[sp_.interface_edge_dofs]
        plus = np.einsum("a,eac->ec", N[0], U)
        minus = np.einsum("a,eac->ec", N[0], U)
        vals = plus - minus
    else:
        gp = _patch_gradients(solution, 1, x_mid)
        gm = _patch_gradients(solution, -1, x_mid)
        if quantity == "flux":
            eye = np.broadcast_to(np.eye(2), (len(x_mid), 2, 2))
            ap = eye if a_plus is None else np.asarray(a_plus(x_mid))
            am = eye if a_minus is None else np.asarray(a_minus(x_mid))
            # flux_c = a^{jk} d_k u_c N_j
            fp = np.einsum("ejk,eck,ej->ec", ap, gp, normals)
            fm = np.einsum("ejk,eck,ej->ec", am, gm, normals)
            vals = fp - fm
        elif quantity == "normal-derivative":
            vals = np.einsum("eci,ei->ec", gp - gm, normals)
        else:
            raise ValueError(f"unknown quantity {quantity!r}")
    return JumpSamples(quantity, x_mid, th, normals, lengths, vals)


# ---------------------------------------------------------------------------
# error norms
# ---------------------------------------------------------------------------


def error_norms(
    solution: TwoPhaseSolution,
    exact: tuple[Callable, Callable],
    grad_exact: tuple[Callable, Callable] | None = None,
    n: int = 6,
    modulo_constant: bool | None = None,
) -> dict[str, float]:
    """``L^2``, broken ``H^1`` seminorm and nodal-interpolant errors.

    ``exact = (u_plus, u_minus)`` are smooth phase-wise extensions; each
    element is compared against the one matching its tag.
    """
    sp_ = solution.space
    mesh = solution.mesh
    modulo = mesh.is_periodic if modulo_constant is None else modulo_constant
    geom = sp_.geometry(n)
    nc = solution.ncomp
    U = solution.values[sp_.element_dofs]
    uh = np.einsum("qa,tac->tqc", geom.N, U)
    ue = np.zeros_like(uh)
    tags = mesh.tags
    for ph, fn in ((1, exact[0]), (-1, exact[1])):
        sel = tags == ph
        ue[sel] = fem._eval_field(fn, geom.x[sel], nc)

    # nodal interpolant of the exact solution
    nodal = np.zeros((sp_.ndof, nc))
    for ph, fn in ((1, exact[0]), (-1, exact[1])):
        idx = np.flatnonzero(sp_.dof_phase == ph)
        nodal[idx] = fem._eval_field(fn, sp_.dof_coords[idx], nc)
    Ie = np.einsum("qa,tac->tqc", geom.N, nodal[sp_.element_dofs])
    dx = geom.dx
    vol = dx.sum()
    err = uh - ue
    nerr = uh - Ie
    if modulo:
        err = err - np.einsum("tq,tqc->c", dx, err) / vol
        nerr = nerr - np.einsum("tq,tqc->c", dx, nerr) / vol
    out = {
        "l2": float(math.sqrt(np.einsum("tq,tqc->", dx, err**2))),
        "nodal_l2": float(math.sqrt(np.einsum("tq,tqc->", dx, nerr**2))),
    }
    if grad_exact is not None:
        gh = np.einsum("tqai,tac->tqci", geom.grad, U)
        ge = np.zeros_like(gh)
        for ph, fn in ((1, grad_exact[0]), (-1, grad_exact[1])):
            sel = tags == ph
            val = np.asarray(fn(geom.x[sel]), dtype=float)
            ge[sel] = val.reshape(val.shape[:2] + (nc, 2))
        out["h1"] = float(math.sqrt(np.einsum("tq,tqci->", dx, (gh - ge) ** 2)))
    return out
