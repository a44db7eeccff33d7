"""Spatial adjustment, flips, std normalisation and the oversampling manifest.

There are 18 adjustment methods: {pad, crop} x {four corners, four edges,
random}.  Whether an axis is actually padded or cropped depends on its length
relative to the target edge ``l`` (shorter -> zero pad, longer -> crop), so
the category only names the method; the position decides the alignment:

* ``corner_*`` aligns the named corner of input and target,
* ``edge_top``/``edge_bottom`` align that edge and draw the column offset,
  ``edge_left``/``edge_right`` align that edge and draw the row offset,
* ``random`` draws both offsets.

Offsets are drawn uniformly from a ``numpy.random.Generator`` (PCG64), row
before column, and only for axes whose length differs from ``l``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import IrdropError, ShapeError
from .grid import MapStack

CATEGORIES = ("pad", "crop")
POSITIONS = ("corner_tl", "corner_tr", "corner_bl", "corner_br",
             "edge_top", "edge_bottom", "edge_left", "edge_right", "random")

# (row alignment, column alignment)
_ALIGN = {
    "corner_tl": ("start", "start"),
    "corner_tr": ("start", "end"),
    "corner_bl": ("end", "start"),
    "corner_br": ("end", "end"),
    "edge_top": ("start", "random"),
    "edge_bottom": ("end", "random"),
    "edge_left": ("random", "start"),
    "edge_right": ("random", "end"),
    "random": ("random", "random"),
}

BATCH_EDGE_RANGE = (496, 512)


@dataclass(frozen=True)
class AdjustMethod:
    category: str
    position: str

    def __post_init__(self):
        if self.category not in CATEGORIES or self.position not in POSITIONS:
            raise ValueError(f"unknown adjust method {self.category}/{self.position}")

    @property
    def name(self) -> str:
        return f"{self.category}-{self.position.replace('_', '-')}"

    @classmethod
    def from_name(cls, name: str) -> "AdjustMethod":
        """Parse ``crop-corner-br`` / ``pad-edge-top`` / ``pad-random``."""
        category, _, position = name.partition("-")
        try:
            return cls(category, position.replace("-", "_"))
        except ValueError:
            valid = ", ".join(m.name for m in METHODS)
            raise ValueError(f"unknown method {name!r}; expected one of: {valid}") from None


METHODS = tuple(AdjustMethod(c, p) for c in CATEGORIES for p in POSITIONS)


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def pick_method(rng: np.random.Generator) -> AdjustMethod:
    return METHODS[int(rng.integers(len(METHODS)))]


def sample_edge_length(rng: np.random.Generator, lo: int = BATCH_EDGE_RANGE[0],
                       hi: int = BATCH_EDGE_RANGE[1]) -> int:
    return int(rng.integers(lo, hi + 1))


def _offset(n: int, l: int, align: str, rng) -> int:
    slack = abs(n - l)
    if slack == 0 or align == "start":
        return 0
    if align == "end":
        return slack
    return int(rng.integers(slack + 1))


def _axis(n: int, l: int, offset: int):
    """(source slice, target slice) for one axis."""
    if n >= l:
        return slice(offset, offset + l), slice(0, l)
    return slice(0, n), slice(offset, offset + n)


def adjust_offsets(h: int, w: int, l: int, method: AdjustMethod, rng=None) -> tuple[int, int]:
    """Row and column offsets the method picks for an h x w input.

    For a cropped axis the offset indexes the input; for a padded axis it is
    where the input lands in the target.
    """
    if l < 1:
        raise ValueError(f"target edge length must be >= 1, got {l}")
    row_align, col_align = _ALIGN[method.position]
    if rng is None and "random" in (row_align, col_align) and (h != l or w != l):
        raise ValueError(f"method {method.name} needs an rng")
    return _offset(h, l, row_align, rng), _offset(w, l, col_align, rng)


def adjust(stack, l: int, method: AdjustMethod, rng=None):
    """Pad/crop every channel of a (c, h, w) stack to (c, l, l) with shared offsets."""
    data = stack.data if isinstance(stack, MapStack) else np.asarray(stack)
    if data.ndim != 3:
        raise ShapeError(f"expected (c, h, w), got {data.shape}")
    c, h, w = data.shape
    oy, ox = adjust_offsets(h, w, l, method, rng)
    src_r, dst_r = _axis(h, l, oy)
    src_c, dst_c = _axis(w, l, ox)
    out = np.zeros((c, l, l), dtype=data.dtype)
    out[:, dst_r, dst_c] = data[:, src_r, src_c]
    return stack.replace(out) if isinstance(stack, MapStack) else out


def flip(stack, horizontal: bool = False, vertical: bool = False):
    """Reverse columns (horizontal) and/or rows (vertical) of every channel."""
    data = stack.data if isinstance(stack, MapStack) else np.asarray(stack)
    if horizontal:
        data = data[..., ::-1]
    if vertical:
        data = data[..., ::-1, :]
    data = np.ascontiguousarray(data)
    return stack.replace(data) if isinstance(stack, MapStack) else data


def compute_stds(dataset) -> np.ndarray:
    """Population std per channel over every pixel of every stack.

    Stacks are combined with the pairwise (Chan et al.) update, so no
    concatenated copy of the dataset is made.
    """
    dataset = list(dataset)
    if not dataset:
        raise IrdropError("cannot compute standard deviations of an empty dataset")
    count = 0
    mean = m2 = None
    for s in dataset:
        data = np.asarray(s.data if isinstance(s, MapStack) else s, dtype=np.float64)
        flat = data.reshape(data.shape[0], -1)
        n = flat.shape[1]
        mu = flat.mean(axis=1)
        sq = ((flat - mu[:, None]) ** 2).sum(axis=1)
        if mean is None:
            count, mean, m2 = n, mu, sq
            continue
        if mu.shape != mean.shape:
            raise ShapeError("stacks in the dataset disagree on channel count")
        total = count + n
        delta = mu - mean
        mean = mean + delta * (n / total)
        m2 = m2 + sq + delta ** 2 * (count * n / total)
        count = total
    return np.sqrt(m2 / count)


def normalize(stack, stds) -> object:
    """Divide each channel by its std; the mean is left in place so zeros stay zero."""
    data = stack.data if isinstance(stack, MapStack) else np.asarray(stack)
    stds = np.asarray(stds, dtype=np.float64)
    if stds.shape != (data.shape[0],):
        raise ShapeError(f"{stds.shape[0] if stds.ndim else 0} stds for {data.shape[0]} channels")
    scale = np.ones_like(stds)
    ok = stds > 0
    if not ok.all():
        warnings.warn(f"channels {np.flatnonzero(~ok).tolist()} have zero std; "
                      "passing them through unscaled", RuntimeWarning)
    scale[ok] = stds[ok]
    out = data / scale[:, None, None].astype(data.dtype)
    return stack.replace(out) if isinstance(stack, MapStack) else out


FACTORS = {"fake": 10, "real": 20, "external": 1}


def build_manifest(cases, fake_factor: int = FACTORS["fake"], real_factor: int = FACTORS["real"],
                   external_factor: int = FACTORS["external"]) -> list[tuple[str, int]]:
    """Oversampled training manifest as ``(case id, replica)`` pairs.

    ``cases`` holds ``{"id": ..., "kind": "fake" | "real" | "external"}``
    mappings (or ``(id, kind)`` pairs).  ``external`` covers augmenting
    corpora that are not oversampled.
    """
    factors = {"fake": fake_factor, "real": real_factor, "external": external_factor}
    if min(factors.values()) < 1:
        raise ValueError("oversampling factors must be >= 1")
    seen = set()
    entries = []
    for case in cases:
        cid, kind = (case["id"], case["kind"]) if isinstance(case, dict) else case
        if cid in seen:
            raise IrdropError(f"duplicate case id {cid!r}")
        if kind not in factors:
            raise ValueError(f"unknown case kind {kind!r}")
        seen.add(cid)
        entries.extend((cid, r) for r in range(factors[kind]))
    entries.sort()
    return entries


def iter_batches(manifest, load, batch_size: int, rng: np.random.Generator,
                 edge_range=BATCH_EDGE_RANGE, flips: bool = True):
    """Yield ``(l, method, batch)`` with batch shaped (B, c, l, l).

    One edge length and one adjustment method per batch; flips drawn per sample.
    ``load(case_id)`` returns a (c, h, w) array or MapStack.
    """
    for lo in range(0, len(manifest), batch_size):
        l = sample_edge_length(rng, *edge_range)
        method = pick_method(rng)
        batch = []
        for cid, _ in manifest[lo:lo + batch_size]:
            x = adjust(load(cid), l, method, rng)
            if flips:
                h, v = rng.integers(2, size=2)
                x = flip(x, bool(h), bool(v))
            batch.append(x.data if isinstance(x, MapStack) else x)
        yield l, method, np.stack(batch)
