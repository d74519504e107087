"""Fitted-mesh finite elements for two-phase elliptic interface problems."""

from .fem import FESpace
from .mesh import InterfaceMesh, MeshingError, OuterBall, PeriodicBox, mesh_from_contour
from .solvers import (
    CompatibilityError,
    JumpSamples,
    OrientationError,
    PositivityError,
    TwoPhaseProblem,
    TwoPhaseSolution,
    error_norms,
    measure_interface_jump,
    solve_stream_2d,
    solve_velocity_2d,
    solve_weak,
    stream_velocity,
)

__all__ = [
    "CompatibilityError",
    "FESpace",
    "InterfaceMesh",
    "JumpSamples",
    "MeshingError",
    "OrientationError",
    "OuterBall",
    "PeriodicBox",
    "PositivityError",
    "TwoPhaseProblem",
    "TwoPhaseSolution",
    "error_norms",
    "measure_interface_jump",
    "mesh_from_contour",
    "solve_stream_2d",
    "solve_velocity_2d",
    "solve_weak",
    "stream_velocity",
]
