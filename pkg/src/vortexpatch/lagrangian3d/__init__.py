"""Lagrangian fixed-point construction of 3-D vortex patches on a periodic grid."""

from .core import (
    COERCIVITY_FLOOR,
    DISPLACEMENT_BOUND,
    EULER_DIAGNOSTIC_NAMES,
    CoercivityError,
    GuardError,
    JacobianError,
    JacobianPack,
    LagrangianState,
    PicardError,
    curl_eta,
    euler_diagnostics,
    flow_map,
    jacobian_pack,
    jacobian_pack_from_gradient,
    picard_solve,
    picard_step,
    sup_l2,
    tangency_residual,
    time_grid,
    transported_vorticity,
    variational_rhs,
    variational_solve,
    zero_mean_defect,
)
from .data import PatchData3D, Surface, ball_patch, biot_savart, preset, ring_patch, smooth_step, zero_data
from .grid import PeriodicField3D, PeriodicGrid
from .io import load_field, save_field

__all__ = [
    "COERCIVITY_FLOOR",
    "CoercivityError",
    "DISPLACEMENT_BOUND",
    "EULER_DIAGNOSTIC_NAMES",
    "GuardError",
    "JacobianError",
    "JacobianPack",
    "LagrangianState",
    "PatchData3D",
    "PeriodicField3D",
    "PeriodicGrid",
    "PicardError",
    "Surface",
    "ball_patch",
    "biot_savart",
    "curl_eta",
    "euler_diagnostics",
    "flow_map",
    "jacobian_pack",
    "jacobian_pack_from_gradient",
    "load_field",
    "picard_solve",
    "picard_step",
    "preset",
    "ring_patch",
    "save_field",
    "smooth_step",
    "sup_l2",
    "tangency_residual",
    "time_grid",
    "transported_vorticity",
    "variational_rhs",
    "variational_solve",
    "zero_data",
    "zero_mean_defect",
]
