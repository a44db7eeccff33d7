"""Golden static IR drop: assemble G V = J and solve it with Jacobi-preconditioned CG.

Voltage-source nodes are eliminated as Dirichlet boundaries, so ``G`` is the
symmetric positive definite conductance matrix over the remaining nodes and
``J`` collects the boundary currents ``vdd / R`` minus the instance loads.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, GraphError, SingularSystemError
from .graph import PdnGraph, validate
from .grid import DEFAULT_CELL_NM, Extent, FeatureMap, rasterize

log = logging.getLogger(__name__)


@dataclass
class LinearSystem:
    G: sp.csr_matrix
    J: np.ndarray
    unknowns: np.ndarray  # graph node id of each unknown
    position: np.ndarray  # unknown index of each graph node, -1 for fixed nodes
    vdd: float

    @property
    def dim(self) -> int:
        return len(self.unknowns)


@dataclass
class NodeVoltages:
    volts: np.ndarray  # per graph node
    vdd: float
    iterations: int = 0
    residual: float = 0.0

    @property
    def ir_drop(self) -> np.ndarray:
        return self.vdd - self.volts


def assemble_system(graph: PdnGraph, check: bool = True) -> LinearSystem:
    if check:
        diag = validate(graph)
        if diag.floating_components:
            raise SingularSystemError(
                f"singular system: {diag.floating_components} component(s) have no voltage "
                f"source, e.g. the one containing node {diag.floating_example}")
    n = graph.n_nodes
    fixed = np.zeros(n, dtype=bool)
    fixed[list(graph.vsource_nodes)] = True
    unknowns = np.flatnonzero(~fixed)
    position = np.full(n, -1, dtype=np.int64)
    position[unknowns] = np.arange(len(unknowns))

    u, v = graph.edge_u, graph.edge_v
    g = 1.0 / graph.edge_ohms
    pu, pv = position[u], position[v]
    dim = len(unknowns)

    # diagonal stamps, then off-diagonals between two unknowns
    diag = np.zeros(dim)
    np.add.at(diag, pu[pu >= 0], g[pu >= 0])
    np.add.at(diag, pv[pv >= 0], g[pv >= 0])
    both = (pu >= 0) & (pv >= 0)
    rows = np.concatenate([np.arange(dim), pu[both], pv[both]])
    cols = np.concatenate([np.arange(dim), pv[both], pu[both]])
    vals = np.concatenate([diag, -g[both], -g[both]])
    G = sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
    G.sum_duplicates()

    J = np.zeros(dim)
    to_fixed_u = (pu >= 0) & (pv < 0)
    to_fixed_v = (pv >= 0) & (pu < 0)
    np.add.at(J, pu[to_fixed_u], graph.vdd * g[to_fixed_u])
    np.add.at(J, pv[to_fixed_v], graph.vdd * g[to_fixed_v])
    for node in sorted(graph.injections):
        p = position[node]
        if p >= 0:
            J[p] -= graph.injections[node]
    return LinearSystem(G=G, J=J, unknowns=unknowns, position=position, vdd=graph.vdd)


def _full_voltages(system: LinearSystem, x: np.ndarray) -> np.ndarray:
    volts = np.full(len(system.position), system.vdd)
    volts[system.unknowns] = x
    return volts


def solve_cg(system: LinearSystem, tol: float = 1e-10, max_iter: int | None = None) -> NodeVoltages:
    """Jacobi-preconditioned conjugate gradient.

    Stops once the true relative residual ``||G V - J|| / ||J||`` is at most
    ``tol``.  The recurrence residual is resynchronised with the true one
    every 50 iterations so long runs do not drift.
    """
    if not 0 < tol < 1:
        raise ValueError(f"tol must be in (0, 1), got {tol}")
    dim = system.dim
    if max_iter is None:
        max_iter = 20 * max(dim, 1)
    if dim == 0:
        return NodeVoltages(_full_voltages(system, np.zeros(0)), system.vdd)
    G, J = system.G, system.J
    norm_j = float(np.linalg.norm(J))
    if norm_j == 0.0:
        return NodeVoltages(_full_voltages(system, np.zeros(dim)), system.vdd)

    inv_diag = 1.0 / G.diagonal()
    # every node sits near vdd; starting there cuts the iteration count
    x = np.full(dim, system.vdd)
    r = J - G @ x
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    rel = float(np.linalg.norm(r)) / norm_j
    it = 0
    while rel > tol and it < max_iter:
        it += 1
        q = G @ p
        alpha = rz / float(p @ q)
        x += alpha * p
        if it % 50 == 0:
            r = J - G @ x
        else:
            r -= alpha * q
        rel = float(np.linalg.norm(r)) / norm_j
        if rel <= tol:
            # confirm on the true residual before accepting
            r = J - G @ x
            rel = float(np.linalg.norm(r)) / norm_j
            if rel <= tol:
                break
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    if rel > tol:
        raise ConvergenceError(
            f"CG did not converge in {max_iter} iterations (relative residual {rel:.3e})", rel)
    log.debug("CG converged in %d iterations, relative residual %.3e", it, rel)
    return NodeVoltages(_full_voltages(system, x), system.vdd, it, rel)


def solve_ir_drop(graph: PdnGraph, tol: float = 1e-10, max_iter: int | None = None) -> NodeVoltages:
    return solve_cg(assemble_system(graph), tol=tol, max_iter=max_iter)


def graph_extent(graph: PdnGraph, cell_nm: int = DEFAULT_CELL_NM) -> Extent:
    """Die extent: bounding box of every node coordinate, anchored at the origin."""
    if not graph.has_geometry():
        raise GraphError("graph has nodes without decoded coordinates")
    xs = [loc.x for loc in graph.nodes]
    ys = [loc.y for loc in graph.nodes]
    for a, b, _ in graph.resistors:
        for loc in (a, b):
            xs.append(loc.x)
            ys.append(loc.y)
    return Extent.covering(xs, ys, cell_nm)


def ir_drop_map(graph: PdnGraph, voltages: NodeVoltages, cell_nm: int = DEFAULT_CELL_NM,
                extent: Extent | None = None) -> FeatureMap:
    """Per-instance IR drop averaged into cells (unit V)."""
    if not graph.instances:
        raise GraphError("no current-source instances to map")
    if extent is None:
        extent = graph_extent(graph, cell_nm)
    inst = graph.instances
    drop = np.array([graph.vdd - voltages.volts[i.node] for i in inst])
    xs = [i.loc.x for i in inst]
    ys = [i.loc.y for i in inst]
    return rasterize(xs, ys, drop, extent, mode="average", unit="V")
