"""Plain-text export of meshes and nodal solutions."""

from __future__ import annotations

import csv
from pathlib import Path

from .mesh import InterfaceMesh
from .solvers import TwoPhaseSolution


def write_mesh(mesh: InterfaceMesh, directory: str | Path) -> dict[str, Path]:
    """``vertices.csv`` (x, y), ``cells.csv`` (v0, v1, v2, tag), ``interface.csv``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {k: d / f"{k}.csv" for k in ("vertices", "cells", "interface")}
    with open(paths["vertices"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        w.writerows([repr(float(x)), repr(float(y))] for x, y in mesh.vertices)
    with open(paths["cells"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["v0", "v1", "v2", "tag"])
        w.writerows([int(a), int(b), int(c), int(t)] for (a, b, c), t in zip(mesh.triangles, mesh.tags))
    with open(paths["interface"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["vertex", "theta", "nx", "ny"])
        for v, th, n in zip(mesh.interface_nodes, mesh.interface_theta, mesh.edge_normals):
            w.writerow([int(v), repr(float(th)), repr(float(n[0])), repr(float(n[1]))])
    return paths


def write_solution(solution: TwoPhaseSolution, path: str | Path) -> Path:
    """One row per dof: ``x, y, phase, u0[, u1]``."""
    path = Path(path)
    sp_ = solution.space
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "phase"] + [f"u{c}" for c in range(solution.ncomp)])
        for (x, y), ph, u in zip(sp_.dof_coords, sp_.dof_phase, solution.values):
            w.writerow([repr(float(x)), repr(float(y)), int(ph)] + [repr(float(v)) for v in u])
    return path
