"""Preconditioned conjugate gradients with breakdown and stall reporting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Operator = Callable[[np.ndarray], np.ndarray]


class IndefiniteError(RuntimeError):
    """CG met a direction with non-positive curvature."""

    def __init__(self, message: str, curvature: float, direction: np.ndarray):
        super().__init__(message)
        self.curvature = curvature
        self.direction = direction


class ConvergenceError(RuntimeError):
    """CG did not reach the tolerance within the iteration budget."""

    def __init__(self, message: str, history: list[float]):
        tail = ", ".join(f"{r:.3e}" for r in history[-5:])
        super().__init__(f"{message}; last residuals: [{tail}]")
        self.history = history


@dataclass
class CGReport:
    iterations: int
    residual: float
    history: list[float] = field(default_factory=list)


def pcg(
    apply_a: Operator,
    b: np.ndarray,
    precond: Operator | None = None,
    x0: np.ndarray | None = None,
    tol: float = 1e-10,
    maxiter: int | None = None,
    project: Operator | None = None,
    inner: Callable[[np.ndarray, np.ndarray], float] | None = None,
) -> tuple[np.ndarray, CGReport]:
    """Solve ``A x = b`` for symmetric positive-definite ``A``.

    Stops when ``||r|| <= tol * ||b||``.  ``project`` removes a known kernel
    (e.g. constants) from residuals and updates so that consistent
    semi-definite systems can be handled.  ``inner`` replaces the Euclidean
    inner product (it must make ``A`` self-adjoint).

    Raises
    ------
    IndefiniteError
        If a search direction has ``p^T A p <= 0``.
    ConvergenceError
        If ``maxiter`` iterations do not reach the tolerance.
    """
    dot = inner or (lambda u, v: float(np.vdot(u, v).real))
    proj = project or (lambda v: v)
    prec = precond or (lambda v: v)
    b = proj(np.asarray(b, dtype=float))
    x = np.zeros_like(b) if x0 is None else proj(np.array(x0, dtype=float))
    maxiter = maxiter or max(10 * b.size, 100)
    bnorm = math.sqrt(dot(b, b))
    if bnorm == 0.0:
        return np.zeros_like(b), CGReport(0, 0.0, [0.0])
    r = b - apply_a(x) if x0 is not None else b.copy()
    r = proj(r)
    z = proj(prec(r))
    p = z.copy()
    rz = dot(r, z)
    history = [math.sqrt(dot(r, r)) / bnorm]
    for it in range(1, maxiter + 1):
        if history[-1] <= tol:
            return x, CGReport(it - 1, history[-1], history)
        ap = proj(apply_a(p))
        curv = dot(p, ap)
        if not curv > 0.0:
            raise IndefiniteError(
                f"non-positive curvature p^T A p = {curv:.3e} at iteration {it}", curv, p
            )
        alpha = rz / curv
        x += alpha * p
        r -= alpha * ap
        history.append(math.sqrt(dot(r, r)) / bnorm)
        z = proj(prec(r))
        rz_new = dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    if history[-1] <= tol:
        return x, CGReport(maxiter, history[-1], history)
    raise ConvergenceError(f"PCG stalled at relative residual {history[-1]:.3e}", history)
