"""Numerics for vortex patches: 2-D contour dynamics, biharmonic flattening maps,
two-phase interface finite elements and a 3-D Lagrangian fixed-point scheme."""

__version__ = "0.1.0"
