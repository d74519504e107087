"""Field snapshots: one JSON header line followed by raw little-endian float64 values.

Byte layout::

    b"VPF3D\\n"
    <UTF-8 JSON header terminated by b"\\n">
        {"shape": [...], "half_length": l, "dtype": "<f8", "order": "C", "name": ...}
    prod(shape) * 8 bytes of C-ordered little-endian float64 values
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grid import PeriodicField3D, PeriodicGrid

MAGIC = b"VPF3D\n"


def save_field(field_: PeriodicField3D, path: str | Path) -> None:
    header = {
        "shape": list(field_.values.shape),
        "half_length": field_.grid.half_length,
        "method": field_.grid.method,
        "dtype": "<f8",
        "order": "C",
        "name": field_.name,
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(field_.values, dtype="<f8").tobytes())


def load_field(path: str | Path) -> PeriodicField3D:
    with open(path, "rb") as fh:
        if fh.readline() != MAGIC:
            raise ValueError(f"{path}: not a field snapshot")
        header = json.loads(fh.readline())
        data = np.frombuffer(fh.read(), dtype="<f8")
    shape = tuple(header["shape"])
    if data.size != int(np.prod(shape)):
        raise ValueError(f"{path}: expected {int(np.prod(shape))} values, found {data.size}")
    grid = PeriodicGrid(shape[-3:], header["half_length"], header.get("method", "spectral"))
    return PeriodicField3D(grid, data.reshape(shape).astype(float), header.get("name", ""))
