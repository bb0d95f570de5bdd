"""Grid file I/O: VMG1 binary, CSV, and PGM exports.

VMG1 layout (little-endian throughout):

    bytes 0-3   ASCII magic "VMG1"
    u32         version (1)
    u32         side
    f64         spacing
    f64         origin_x
    f64         origin_y
    side^2 f64  values, row-major, row index = increasing second coordinate

CSV export: header ``x,y,value``, one cell per line, 17 significant digits
(enough to round-trip a double).  PGM export: binary P5, maxval 255, linear
min-max scaling; image rows run top to bottom, i.e. DECREASING second
coordinate, so the picture is oriented like a plot.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .fields import FieldGrid

__all__ = ["write_vmg", "read_vmg", "write_csv", "write_pgm", "write_grid"]

_MAGIC = b"VMG1"
_HEADER = struct.Struct("<4sII3d")  # magic, version, side, spacing, ox, oy
_VERSION = 1


def write_vmg(grid: FieldGrid, path) -> None:
    """Write a grid as a VMG1 file (byte-deterministic for equal grids)."""
    v = np.ascontiguousarray(grid.values, dtype="<f8")
    header = _HEADER.pack(_MAGIC, _VERSION, grid.side, grid.spacing,
                          grid.origin[0], grid.origin[1])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(v.tobytes(order="C"))


def read_vmg(path) -> FieldGrid:
    """Read a VMG1 file back into a FieldGrid (lossless round trip)."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValidationError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, side, spacing, ox, oy = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValidationError(f"{path}: bad magic {magic!r}, expected {_MAGIC!r}")
    if version != _VERSION:
        raise ValidationError(f"{path}: unsupported version {version}")
    need = _HEADER.size + 8 * side * side
    if len(raw) != need:
        raise ValidationError(
            f"{path}: size {len(raw)} does not match side {side} "
            f"(expected {need} bytes)"
        )
    values = np.frombuffer(raw, dtype="<f8", count=side * side,
                           offset=_HEADER.size).reshape(side, side)
    return FieldGrid(values=values.copy(), spacing=spacing, origin=(ox, oy))


def write_csv(grid: FieldGrid, path) -> None:
    """Write the grid as x,y,value rows (17 significant digits)."""
    x, y = grid.coords()
    with open(path, "w", newline="") as fh:
        fh.write("x,y,value\n")
        for r in range(grid.side):
            row = grid.values[r]
            yr = y[r]
            for c in range(grid.side):
                fh.write(f"{x[c]:.17g},{yr:.17g},{row[c]:.17g}\n")


def write_pgm(grid: FieldGrid, path) -> None:
    """Write the grid as a binary PGM (P5) heatmap, min-max scaled to 0..255.

    Image rows run top to bottom, so the LAST grid row (largest second
    coordinate) is the FIRST image row.  A constant grid maps to mid-gray.
    """
    v = grid.values
    lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        img = np.rint((v - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        img = np.full(v.shape, 128, dtype=np.uint8)
    img = img[::-1, :]  # flip: decreasing second coordinate downwards
    with open(path, "wb") as fh:
        fh.write(f"P5\n{grid.side} {grid.side}\n255\n".encode("ascii"))
        fh.write(img.tobytes(order="C"))


_WRITERS = {"vmg": write_vmg, "csv": write_csv, "pgm": write_pgm}


def write_grid(grid: FieldGrid, path, fmt: str) -> Path:
    """Write `grid` at `path` with the extension swapped to match `fmt`.

    Returns the path actually written.
    """
    fmt = fmt.lower()
    if fmt not in _WRITERS:
        raise ValidationError(
            f"unknown grid format {fmt!r} (choose from {sorted(_WRITERS)})"
        )
    p = Path(path).with_suffix("." + fmt)
    _WRITERS[fmt](grid, p)
    return p
