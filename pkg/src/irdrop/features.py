"""The seven input feature maps, rasterized on a fixed-size cell grid.

Channel order is fixed (see ``CHANNELS``)::

    current, effective_distance, pdn_density, sp_resistance, sp_voltage,
    resistor_count, resistance

The geometric maps project the 3-D network onto the die plane: layers are
ignored and each resistor becomes an axis-aligned segment between its
endpoints' (x, y).
"""

from __future__ import annotations

import heapq
import logging
import warnings

import numpy as np

from .errors import GraphError
from .graph import PdnGraph
from .grid import DEFAULT_CELL_NM, Extent, FeatureMap, MapStack, rasterize
from .solver import NodeVoltages, graph_extent, ir_drop_map, solve_ir_drop

log = logging.getLogger(__name__)

CHANNELS = ("current", "effective_distance", "pdn_density", "sp_resistance",
            "sp_voltage", "resistor_count", "resistance")
TRUTH_CHANNEL = "ir_drop"

NM_PER_UM = 1000.0


def _instance_arrays(graph: PdnGraph):
    inst = graph.instances
    xs = np.array([i.loc.x for i in inst], dtype=np.int64)
    ys = np.array([i.loc.y for i in inst], dtype=np.int64)
    amps = np.array([i.amps for i in inst], dtype=np.float64)
    nodes = np.array([i.node for i in inst], dtype=np.int64)
    return xs, ys, amps, nodes


def _extent(graph, cell_nm, extent):
    return extent if extent is not None else graph_extent(graph, cell_nm)


def current_map(graph: PdnGraph, cell_nm: int = DEFAULT_CELL_NM, extent: Extent | None = None) -> FeatureMap:
    """Per-cell sum of instance currents (A)."""
    extent = _extent(graph, cell_nm, extent)
    xs, ys, amps, _ = _instance_arrays(graph)
    return rasterize(xs, ys, amps, extent, mode="sum", unit="A")


# -- effective distance -------------------------------------------------------

def source_distances(graph: PdnGraph) -> np.ndarray:
    """Euclidean instance-to-source distances in um, shape (instances, K)."""
    if not graph.vsource_locs:
        raise GraphError("effective distance needs at least one voltage source")
    xs, ys, _, _ = _instance_arrays(graph)
    sx = np.array([loc.x for loc in graph.vsource_locs], dtype=np.float64)
    sy = np.array([loc.y for loc in graph.vsource_locs], dtype=np.float64)
    dx = (xs[:, None] - sx[None, :]) / NM_PER_UM
    dy = (ys[:, None] - sy[None, :]) / NM_PER_UM
    return np.hypot(dx, dy)


def effective_distance(d) -> np.ndarray:
    """Reciprocal of the summed reciprocal distances, row-wise.

    Evaluated as ``d_min / sum(d_min / d_i)``: algebraically identical, but
    the nearest source contributes exactly 1 to the sum, so the result never
    exceeds ``d_min`` and K equal distances give exactly ``d / K``.
    Rows containing a zero distance give 0.
    """
    d = np.atleast_2d(np.asarray(d, dtype=np.float64))
    if d.shape[1] == 0:
        raise GraphError("effective distance needs at least one voltage source")
    if (d < 0).any():
        raise ValueError("distances must be non-negative")
    dmin = d.min(axis=1)
    out = np.zeros(d.shape[0])
    ok = dmin > 0
    out[ok] = dmin[ok] / (dmin[ok, None] / d[ok]).sum(axis=1)
    return out


def effective_distance_map(graph: PdnGraph, cell_nm: int = DEFAULT_CELL_NM,
                           extent: Extent | None = None, chunk: int = 1 << 16) -> FeatureMap:
    extent = _extent(graph, cell_nm, extent)
    if not graph.vsource_locs:
        raise GraphError("effective distance needs at least one voltage source")
    xs, ys, _, _ = _instance_arrays(graph)
    sx = np.array([loc.x for loc in graph.vsource_locs], dtype=np.float64)
    sy = np.array([loc.y for loc in graph.vsource_locs], dtype=np.float64)
    de = np.empty(len(xs))
    step = max(1, chunk // max(1, len(sx)))
    for lo in range(0, len(xs), step):
        hi = lo + step
        d = np.hypot((xs[lo:hi, None] - sx) / NM_PER_UM, (ys[lo:hi, None] - sy) / NM_PER_UM)
        de[lo:hi] = effective_distance(d)
    return rasterize(xs, ys, de, extent, mode="average", unit="um")


# -- shortest-path resistance -------------------------------------------------

def _csr_lists(graph: PdnGraph):
    n = graph.n_nodes
    u = np.concatenate([graph.edge_u, graph.edge_v])
    v = np.concatenate([graph.edge_v, graph.edge_u])
    w = np.concatenate([graph.edge_ohms, graph.edge_ohms])
    order = np.argsort(u, kind="stable")
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(u, minlength=n), out=indptr[1:])
    return indptr.tolist(), v[order].tolist(), w[order].tolist()


def multi_source_dijkstra(graph: PdnGraph, sources) -> np.ndarray:
    """Shortest-path resistance from every node to its nearest source (ohm).

    All sources are seeded at distance 0 in one run, which yields the same
    distances as taking the minimum over one run per source.  Unreachable
    nodes get ``inf`` and a warning.
    """
    sources = sorted(set(int(s) for s in sources))
    if not sources:
        raise GraphError("shortest paths need at least one source node")
    if (graph.edge_ohms <= 0).any():
        raise GraphError("edge resistances must be positive")
    n = graph.n_nodes
    indptr, nbr, wt = _csr_lists(graph)
    dist = [float("inf")] * n
    done = [False] * n
    heap = []
    for s in sources:
        dist[s] = 0.0
        heap.append((0.0, s))
    heapq.heapify(heap)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for k in range(indptr[u], indptr[u + 1]):
            v = nbr[k]
            nd = d + wt[k]
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    out = np.array(dist)
    unreachable = int(np.isinf(out).sum())
    if unreachable:
        warnings.warn(f"{unreachable} node(s) unreachable from every voltage source", RuntimeWarning)
    return out


def shortest_path_maps(graph: PdnGraph, cell_nm: int = DEFAULT_CELL_NM,
                       extent: Extent | None = None, rho: np.ndarray | None = None):
    """Cell-averaged shortest-path resistance (ohm) and resistance x current (V)."""
    extent = _extent(graph, cell_nm, extent)
    if rho is None:
        rho = multi_source_dijkstra(graph, graph.vsource_nodes)
    xs, ys, amps, nodes = _instance_arrays(graph)
    r = rho[nodes] if len(nodes) else np.zeros(0)
    r = np.where(np.isfinite(r), r, 0.0)
    res = rasterize(xs, ys, r, extent, mode="average", unit="ohm")
    volt = rasterize(xs, ys, r * amps, extent, mode="average", unit="V")
    return res, volt


# -- resistor geometry --------------------------------------------------------

def _segment_arrays(graph: PdnGraph):
    if not graph.resistors:
        z = np.zeros(0, dtype=np.int64)
        return z, z, z, z, z, z, np.zeros(0)
    try:
        la = np.array([a.layer for a, _, _ in graph.resistors], dtype=np.int64)
        lb = np.array([b.layer for _, b, _ in graph.resistors], dtype=np.int64)
        ax = np.array([a.x for a, _, _ in graph.resistors], dtype=np.int64)
        ay = np.array([a.y for a, _, _ in graph.resistors], dtype=np.int64)
        bx = np.array([b.x for _, b, _ in graph.resistors], dtype=np.int64)
        by = np.array([b.y for _, b, _ in graph.resistors], dtype=np.int64)
    except AttributeError:
        raise GraphError("resistor endpoints without decoded coordinates") from None
    ohms = np.array([r for _, _, r in graph.resistors], dtype=np.float64)
    return la, lb, ax, ay, bx, by, ohms


def resistor_cells(graph: PdnGraph, extent: Extent):
    """Flat cell indices overlapped by each resistor's projected segment.

    Returns ``(owner, cell, span)``: resistor ``owner[k]`` overlaps flat cell
    ``cell[k]`` (row-major) and ``span[i]`` counts the cells of resistor i.  A segment overlaps every cell containing a
    point of the closed segment; a via overlaps exactly one cell.
    """
    _, _, ax, ay, bx, by, _ = _segment_arrays(graph)
    diag = (ax != bx) & (ay != by)
    if diag.any():
        k = int(np.flatnonzero(diag)[0])
        raise GraphError(f"resistor {k} is diagonal ({ax[k]},{ay[k]})-({bx[k]},{by[k]}); "
                         "rails must be rectilinear")
    c = extent.cell_nm
    c0, c1 = np.minimum(ax, bx) // c, np.maximum(ax, bx) // c
    r0, r1 = np.minimum(ay, by) // c, np.maximum(ay, by) // c
    span = (c1 - c0) + (r1 - r0) + 1  # one of the two differences is zero
    owner = np.repeat(np.arange(len(ax)), span)
    starts = np.cumsum(span) - span
    step = np.arange(len(owner)) - np.repeat(starts, span)
    horizontal = (c1 > c0)[owner]
    rows = r0[owner] + np.where(horizontal, 0, step)
    cols = c0[owner] + np.where(horizontal, step, 0)
    return owner, rows * extent.w + cols, span


def resistor_count_map(graph: PdnGraph, cell_nm: int = DEFAULT_CELL_NM,
                       extent: Extent | None = None) -> FeatureMap:
    extent = _extent(graph, cell_nm, extent)
    _, cells, _ = resistor_cells(graph, extent)
    counts = np.bincount(cells, minlength=extent.h * extent.w).astype(np.float64)
    return FeatureMap(counts.reshape(extent.h, extent.w), "count", extent.cell_nm)


def resistance_map(graph: PdnGraph, cell_nm: int = DEFAULT_CELL_NM,
                   extent: Extent | None = None) -> FeatureMap:
    """Each resistor's ohms split evenly over the cells it overlaps."""
    extent = _extent(graph, cell_nm, extent)
    owner, cells, span = resistor_cells(graph, extent)
    ohms = _segment_arrays(graph)[-1]
    share = (ohms / span)[owner] if len(owner) else np.zeros(0)
    total = np.bincount(cells, weights=share, minlength=extent.h * extent.w)
    return FeatureMap(total.reshape(extent.h, extent.w), "ohm/cell", extent.cell_nm)


def rail_pitches(graph: PdnGraph) -> dict:
    """Median rail pitch in um per (layer, orientation); None if fewer than two rails."""
    la, lb, ax, ay, bx, by, _ = _segment_arrays(graph)
    out = {}
    same = la == lb
    for orient, mask, coord in (("h", same & (ay == by) & (ax != bx), ay),
                                ("v", same & (ax == bx) & (ay != by), ax)):
        for layer in np.unique(la[mask]):
            rails = np.unique(coord[mask & (la == layer)])
            out[(int(layer), orient)] = (float(np.median(np.diff(rails))) / NM_PER_UM
                                         if len(rails) > 1 else None)
    return out


def pdn_density_map(graph: PdnGraph, cell_nm: int = DEFAULT_CELL_NM,
                    extent: Extent | None = None) -> FeatureMap:
    """Sum of 1/pitch (1/um) over the rail groups passing through each cell.

    A rail group is the set of same-layer runs sharing an orientation; its
    pitch is the median spacing of its distinct rail coordinates.  Vias do
    not count as rails, and a group with a single rail contributes 0.
    """
    extent = _extent(graph, cell_nm, extent)
    la, lb, ax, ay, bx, by, _ = _segment_arrays(graph)
    density = np.zeros(extent.h * extent.w)
    if len(la) == 0:
        return FeatureMap(density.reshape(extent.h, extent.w), "1/um", extent.cell_nm)
    owner, cells, _ = resistor_cells(graph, extent)
    same = la == lb
    orient = np.full(len(la), "", dtype="<U1")
    orient[same & (ay == by) & (ax != bx)] = "h"
    orient[same & (ax == bx) & (ay != by)] = "v"
    for (layer, o), pitch in sorted(rail_pitches(graph).items()):
        if not pitch:
            continue
        members = (la == layer) & (orient == o)
        hit = np.zeros(extent.h * extent.w, dtype=bool)
        hit[cells[members[owner]]] = True
        density[hit] += 1.0 / pitch
    return FeatureMap(density.reshape(extent.h, extent.w), "1/um", extent.cell_nm)


# -- all channels -------------------------------------------------------------

def extract_all(graph: PdnGraph, truth_solver=None, cell_nm: int = DEFAULT_CELL_NM,
                tol: float = 1e-10) -> MapStack:
    """Stack the seven features, plus the golden IR drop map when asked.

    ``truth_solver`` may be ``True`` (solve with CG at ``tol``) or a callable
    ``graph -> NodeVoltages``.
    """
    if not graph.instances:
        raise GraphError("graph has no current-source instances")
    extent = graph_extent(graph, cell_nm)
    sp_res, sp_volt = shortest_path_maps(graph, extent=extent)
    maps = [
        current_map(graph, extent=extent),
        effective_distance_map(graph, extent=extent),
        pdn_density_map(graph, extent=extent),
        sp_res,
        sp_volt,
        resistor_count_map(graph, extent=extent),
        resistance_map(graph, extent=extent),
    ]
    names = list(CHANNELS)
    if truth_solver:
        if truth_solver is True:
            volts: NodeVoltages = solve_ir_drop(graph, tol=tol)
        else:
            volts = truth_solver(graph)
        maps.append(ir_drop_map(graph, volts, extent=extent))
        names.append(TRUTH_CHANNEL)
    return MapStack.from_maps(maps, names)
