"""Manufactured solutions and mesh-refinement studies for two-phase problems."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import sympy as sym

from ..contour2d import Contour
from ..flatten import jacobian as map_jacobian
from ..flatten import solve_annulus_extension, solve_disk_extension
from .mesh import OuterBall, PeriodicBox, mesh_from_contour
from .solvers import TwoPhaseProblem, error_norms, measure_interface_jump, solve_weak

X, Y = sym.symbols("x y", real=True)


def _vectorize(expr: sym.Expr) -> Callable[[np.ndarray], np.ndarray]:
    f = sym.lambdify((X, Y), expr, "numpy")

    def call(p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.broadcast_to(np.asarray(f(p[..., 0], p[..., 1]), dtype=float), p.shape[:-1]).copy()

    return call


def _vectorize_grad(expr: sym.Expr) -> Callable[[np.ndarray], np.ndarray]:
    gx, gy = _vectorize(sym.diff(expr, X)), _vectorize(sym.diff(expr, Y))
    return lambda p: np.stack([gx(p), gy(p)], axis=-1)


@dataclass
class Manufactured:
    """Phase-wise exact solution and the problem data it induces."""

    contour: Contour
    problem: TwoPhaseProblem
    exact: tuple[Callable, Callable]
    grad: tuple[Callable, Callable]
    flux_jump: Callable[[np.ndarray], np.ndarray] | None  # of theta
    outer: OuterBall | PeriodicBox = field(default_factory=lambda: OuterBall(2.5, graded=False))


def manufactured_ellipse(
    a: float = 1.0,
    b: float = 0.7,
    u_minus: sym.Expr | None = None,
    bump: sym.Expr | None = None,
    coeff_plus: sym.Matrix | None = None,
    coeff_minus: sym.Matrix | None = None,
    outer: OuterBall | PeriodicBox | None = None,
    N: int = 8,
) -> Manufactured:
    """Exact ``u+ = u- + L s`` with ``L = (x/a)^2 + (y/b)^2 - 1``.

    ``L`` vanishes on the ellipse, so ``[[u]] = 0`` and the flux jump is
    ``s a+ grad L . N`` plus the coefficient contrast term.  ``f`` and
    ``g`` follow by symbolic differentiation.
    """
    u_minus = u_minus if u_minus is not None else sym.sin(1.3 * X) * sym.cos(0.7 * Y) + X * Y / 4
    bump = bump if bump is not None else 1 + X / 2 - Y**2 / 4
    L = (X / a) ** 2 + (Y / b) ** 2 - 1
    u_plus = u_minus + L * bump
    eye = sym.eye(2)
    Ap = coeff_plus if coeff_plus is not None else eye
    Am = coeff_minus if coeff_minus is not None else eye

    def flux(u: sym.Expr, A: sym.Matrix) -> sym.Matrix:
        return A * sym.Matrix([sym.diff(u, X), sym.diff(u, Y)])

    def forcing(u: sym.Expr, A: sym.Matrix) -> sym.Expr:
        F = flux(u, A)
        return sym.simplify(-(sym.diff(F[0], X) + sym.diff(F[1], Y)))

    contour = Contour.ellipse(a, b, N=N)
    Fp, Fm = flux(u_plus, Ap), flux(u_minus, Am)
    fpx, fpy, fmx, fmy = (_vectorize(e) for e in (Fp[0], Fp[1], Fm[0], Fm[1]))

    def flux_jump(theta: np.ndarray) -> np.ndarray:
        z = contour(theta)
        t = contour(theta, 1)
        n = np.stack([t[..., 1], -t[..., 0]], axis=-1)
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        return (fpx(z) - fmx(z)) * n[..., 0] + (fpy(z) - fmy(z)) * n[..., 1]

    def coeff(A: sym.Matrix):
        if A is eye:
            return None
        parts = [[_vectorize(A[i, j]) for j in range(2)] for i in range(2)]
        return lambda p: np.stack(
            [np.stack([parts[i][j](p) for j in range(2)], axis=-1) for i in range(2)], axis=-2
        )

    up, um = _vectorize(u_plus), _vectorize(u_minus)
    problem = TwoPhaseProblem(
        f_plus=_vectorize(forcing(u_plus, Ap)),
        f_minus=_vectorize(forcing(u_minus, Am)),
        g=lambda x, theta: flux_jump(theta),
        a_plus=coeff(Ap),
        a_minus=coeff(Am),
        dirichlet=um,
        name="manufactured-ellipse",
    )
    return Manufactured(
        contour,
        problem,
        (up, um),
        (_vectorize_grad(u_plus), _vectorize_grad(u_minus)),
        flux_jump,
        outer or OuterBall(2.5, graded=False),
    )


def run_manufactured(man: Manufactured, h: float, degree: int = 1) -> dict[str, float]:
    """Solve on a fresh mesh of size ``h`` and return error norms."""
    mesh = mesh_from_contour(man.contour, h, man.outer)
    sol = solve_weak(man.problem, mesh, degree)
    errs = error_norms(sol, man.exact, man.grad)
    if man.flux_jump is not None:
        jumps = measure_interface_jump(sol, "flux", man.problem.a_plus, man.problem.a_minus)
        errs["flux_jump"] = jumps.l2_distance(man.flux_jump(jumps.theta))
    errs["ndof"] = float(sol.report.ndof)
    return errs


# ---------------------------------------------------------------------------
# coefficient pulled back through a biharmonic chart
# ---------------------------------------------------------------------------


def pullback_coefficient(contour: Contour, R: float | None = None):
    """Coefficient ``J A A^T`` of ``Z^{-1}`` pulled back to the reference circle.

    Inside the unit disk ``Z = Z+``, on ``1 <= r <= R`` ``Z = Z-`` and
    beyond ``R`` the identity.  Returns ``(a_plus, a_minus)`` callables.
    """
    zp = solve_disk_extension(contour)
    zm = solve_annulus_extension(contour, R)

    def a_of(jac: np.ndarray) -> np.ndarray:
        det = np.linalg.det(jac)
        inv = np.linalg.inv(jac)
        return det[..., None, None] * inv @ np.swapaxes(inv, -1, -2)

    def polar(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return np.hypot(p[..., 0], p[..., 1]), np.arctan2(p[..., 1], p[..., 0])

    def a_plus(p: np.ndarray) -> np.ndarray:
        r, th = polar(p)
        return a_of(map_jacobian(zp, np.minimum(r, 1.0), th))

    def a_minus(p: np.ndarray) -> np.ndarray:
        r, th = polar(p)
        out = np.broadcast_to(np.eye(2), r.shape + (2, 2)).copy()
        inside = r <= zm.R
        if inside.any():
            out[inside] = a_of(map_jacobian(zm, np.clip(r[inside], 1.0, zm.R), th[inside]))
        return out

    return a_plus, a_minus


def manufactured_weak(
    contour: Contour,
    a_plus: Callable | None,
    a_minus: Callable | None,
    outer: OuterBall | PeriodicBox | None = None,
) -> Manufactured:
    """Ritz-projection problem: load ``l(phi) = int a grad u_exact . grad phi``.

    Used for coefficients available only numerically; the exact solution is
    the default circle manufactured pair, ``u+ = u- + (r^2 - 1) s``.
    """
    base = manufactured_ellipse(1.0, 1.0, outer=outer)
    gp, gm = base.grad

    def flux(a, g):
        if a is None:
            return lambda p: g(p)[..., None, :]
        return lambda p: np.einsum("...jk,...k->...j", a(p), g(p))[..., None, :]

    problem = TwoPhaseProblem(
        flux_plus=flux(a_plus, gp),
        flux_minus=flux(a_minus, gm),
        a_plus=a_plus,
        a_minus=a_minus,
        dirichlet=base.exact[1],
        name="ritz-projection",
    )
    return Manufactured(base.contour, problem, base.exact, base.grad, None, base.outer)


# ---------------------------------------------------------------------------
# rates
# ---------------------------------------------------------------------------


@dataclass
class RateTable:
    h: list[float]
    errors: dict[str, list[float]]
    rates: dict[str, float]
    label: str = ""

    def to_csv(self, path: str | Path) -> None:
        names = sorted(self.errors)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["h"] + names)
            for i, h in enumerate(self.h):
                w.writerow([repr(h)] + [repr(self.errors[n][i]) for n in names])
            w.writerow(["rate"] + [repr(self.rates[n]) for n in names])


def fit_rates(h: Sequence[float], errors: dict[str, Sequence[float]]) -> dict[str, float]:
    lh = np.log(np.asarray(h, dtype=float))
    out = {}
    for name, e in errors.items():
        e = np.asarray(e, dtype=float)
        if np.any(np.diff(e) > 0) and np.all(np.diff(lh) < 0):
            warnings.warn(f"errors for {name!r} are not monotone under refinement", RuntimeWarning)
        out[name] = float(np.polyfit(lh, np.log(e), 1)[0])
    return out


def convergence_study(
    run: Callable[[float], dict[str, float]], hs: Sequence[float], label: str = ""
) -> RateTable:
    """Run ``run(h)`` for each ``h`` and fit log-log slopes per error norm.

    Raises
    ------
    ValueError
        If fewer than three mesh sizes are given.
    """
    if len(hs) < 3:
        raise ValueError("need at least three mesh sizes")
    hs = sorted((float(h) for h in hs), reverse=True)
    table: dict[str, list[float]] = {}
    for h in hs:
        for k, v in run(h).items():
            if k == "ndof":
                continue
            table.setdefault(k, []).append(v)
    return RateTable(hs, table, fit_rates(hs, table), label)
