"""IRFM map files and CSV export.

Layout (little-endian)::

    b"IRFM"  u16 version=1  u32 c  u32 h  u32 w  u32 cell_nm
    u8 unit tag per channel
    f32 payload, channel-major, row-major within a channel

Unit tags index ``grid.UNITS``.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .grid import UNITS, FeatureMap, MapStack

MAGIC = b"IRFM"
VERSION = 1
_HEADER = struct.Struct("<4sHIIII")


def write_irfm(path, stack) -> None:
    if isinstance(stack, FeatureMap):
        stack = MapStack(stack.data[None], (stack.unit,), stack.cell_nm)
    tags = bytes(UNITS.index(u) for u in stack.units)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, stack.c, stack.h, stack.w, stack.cell_nm))
        f.write(tags)
        f.write(np.ascontiguousarray(stack.data, dtype="<f4").tobytes())


def read_irfm(path) -> MapStack:
    buf = Path(path).read_bytes()
    if len(buf) < _HEADER.size:
        raise FormatError(f"{path}: truncated IRFM header")
    magic, version, c, h, w, cell = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FormatError(f"{path}: not an IRFM file (bad magic)")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported IRFM version {version}")
    body = buf[_HEADER.size:]
    expected = c + 4 * c * h * w
    if len(body) != expected:
        raise FormatError(f"{path}: payload is {len(body)} bytes, header implies {expected}")
    try:
        units = [UNITS[t] for t in body[:c]]
    except IndexError:
        raise FormatError(f"{path}: unknown unit tag") from None
    data = np.frombuffer(body[c:], dtype="<f4").reshape(c, h, w).astype(np.float32)
    return MapStack(data, units, cell)


def write_csv(path, data) -> None:
    """One map, h rows of w comma-separated values (shortest round-trip float32 repr)."""
    data = np.asarray(data, dtype=np.float32)
    with open(path, "w") as f:
        for row in data:
            f.write(",".join(str(v) for v in row))
            f.write("\n")


def read_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
