"""Cell grids: FeatureMap, MapStack and point rasterization.

The grid origin is fixed at (0, 0) nm and a point at ``(x, y)`` lands in
row ``y // cell_nm``, column ``x // cell_nm``.  Keeping the origin fixed
(rather than at the bounding-box minimum) makes every map translation
covariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

DEFAULT_CELL_NM = 1000

# Unit tags, in the order of their IRFM byte codes.
UNITS = ("A", "um", "1/um", "ohm", "V", "count", "ohm/cell", "1")


@dataclass(frozen=True)
class Extent:
    """Grid size in cells plus the cell edge length in nm."""

    h: int
    w: int
    cell_nm: int = DEFAULT_CELL_NM

    @classmethod
    def covering(cls, xs, ys, cell_nm: int = DEFAULT_CELL_NM) -> "Extent":
        """Smallest grid anchored at the origin that holds every (x, y)."""
        xs = np.asarray(xs)
        ys = np.asarray(ys)
        if xs.size == 0:
            return cls(1, 1, cell_nm)
        if xs.min() < 0 or ys.min() < 0:
            raise ShapeError("negative coordinates cannot be rasterized")
        return cls(int(ys.max()) // cell_nm + 1, int(xs.max()) // cell_nm + 1, cell_nm)


@dataclass
class FeatureMap:
    data: np.ndarray  # (h, w) float64
    unit: str
    cell_nm: int = DEFAULT_CELL_NM

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or min(self.data.shape) < 1:
            raise ShapeError(f"feature map must be 2-D and non-empty, got {self.data.shape}")
        if self.unit not in UNITS:
            raise ValueError(f"unknown unit {self.unit!r}")

    @property
    def h(self) -> int:
        return self.data.shape[0]

    @property
    def w(self) -> int:
        return self.data.shape[1]


@dataclass
class MapStack:
    data: np.ndarray  # (c, h, w)
    units: tuple
    cell_nm: int = DEFAULT_CELL_NM
    names: tuple | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 3 or self.data.shape[0] < 1:
            raise ShapeError(f"map stack must be (c, h, w) with c >= 1, got {self.data.shape}")
        self.units = tuple(self.units)
        if len(self.units) != self.c:
            raise ShapeError(f"{len(self.units)} units for {self.c} channels")
        if self.names is not None:
            self.names = tuple(self.names)

    @property
    def c(self) -> int:
        return self.data.shape[0]

    @property
    def h(self) -> int:
        return self.data.shape[1]

    @property
    def w(self) -> int:
        return self.data.shape[2]

    def channel(self, i: int) -> FeatureMap:
        return FeatureMap(self.data[i], self.units[i], self.cell_nm)

    def replace(self, data) -> "MapStack":
        return MapStack(data, self.units, self.cell_nm, self.names)

    @classmethod
    def from_maps(cls, maps, names=None) -> "MapStack":
        shapes = {m.data.shape for m in maps}
        cells = {m.cell_nm for m in maps}
        if len(shapes) != 1 or len(cells) != 1:
            raise ShapeError(f"maps disagree on shape/cell size: {shapes}, {cells}")
        return cls(np.stack([m.data for m in maps]), [m.unit for m in maps],
                   cells.pop(), names)


def rasterize(xs, ys, values, extent: Extent, mode: str = "average", unit: str = "1") -> FeatureMap:
    """Accumulate point values into cells.

    ``mode="sum"`` adds values per cell; ``mode="average"`` divides that sum by
    the per-cell point count.  Empty cells are 0.  Accumulation is in input
    order, so results are bit-stable.
    """
    if mode not in ("average", "sum"):
        raise ValueError(f"mode must be 'average' or 'sum', got {mode!r}")
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if not (xs.shape == ys.shape == values.shape):
        raise ShapeError("xs, ys and values must have matching shapes")
    cols = xs // extent.cell_nm
    rows = ys // extent.cell_nm
    if xs.size and (xs.min() < 0 or ys.min() < 0 or cols.max() >= extent.w or rows.max() >= extent.h):
        raise ShapeError("point outside the rasterization extent")
    flat = rows * extent.w + cols
    total = np.bincount(flat, weights=values, minlength=extent.h * extent.w)
    if mode == "average":
        count = np.bincount(flat, minlength=extent.h * extent.w)
        total = np.divide(total, count, out=np.zeros_like(total), where=count > 0)
    return FeatureMap(total.reshape(extent.h, extent.w), unit, extent.cell_nm)
