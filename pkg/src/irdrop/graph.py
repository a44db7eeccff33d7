"""Geometric resistor graph built from a parsed netlist."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import GraphError, NetlistError
from .spice import GROUND, NodeLoc, PdnNetlist, parse_node_name

log = logging.getLogger(__name__)

DEFAULT_VDD = 1.1
MAX_PDN_DEGREE = 6


@dataclass(frozen=True)
class Instance:
    node: int
    amps: float
    loc: NodeLoc | None


@dataclass
class PdnGraph:
    """Immutable-by-convention graph.

    ``nodes``/``names`` are indexed by node id.  ``index`` maps every netlist
    node name (including names merged away by zero-ohm resistors) to its id.
    ``edges`` excludes zero-ohm resistors and resulting self loops, while
    ``resistors`` keeps the endpoint locations of every physical resistor for
    the geometric feature maps.
    """

    nodes: list
    names: list[str]
    index: dict[str, int]
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_ohms: np.ndarray
    injections: dict[int, float]
    instances: list[Instance]
    vsource_nodes: frozenset
    vsource_locs: list
    vdd: float = DEFAULT_VDD
    resistors: list = field(default_factory=list)  # (NodeLoc|None, NodeLoc|None, ohms)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edge_ohms)

    @property
    def edges(self):
        return list(zip(self.edge_u.tolist(), self.edge_v.tolist(), self.edge_ohms.tolist()))

    def has_geometry(self) -> bool:
        return all(loc is not None for loc in self.nodes)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=np.int64)
        np.add.at(deg, self.edge_u, 1)
        np.add.at(deg, self.edge_v, 1)
        return deg

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric edge-count adjacency, used for connectivity."""
        n = self.n_nodes
        data = np.ones(2 * self.n_edges)
        rows = np.concatenate([self.edge_u, self.edge_v])
        cols = np.concatenate([self.edge_v, self.edge_u])
        return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        parent[i], i = root, parent[i]
    return root


def build_graph(netlist: PdnNetlist, vdd: float = DEFAULT_VDD, strict_names: bool = True) -> PdnGraph:
    """Index nodes, merge zero-ohm resistors and collect sources.

    With ``strict_names=False`` names outside the geometric grammar are
    accepted and get no location; such graphs can be solved but not rasterized.
    """
    if not vdd > 0:
        raise GraphError(f"vdd must be positive, got {vdd}")
    for vs in netlist.voltage_sources:
        if abs(vs.volts - vdd) > 1e-9:
            raise GraphError(f"voltage source {vs.name} is {vs.volts} V but vdd is {vdd} V; "
                             "mixed-rail nets are not supported")
    for r in netlist.resistors:
        if GROUND in (r.node_a, r.node_b):
            raise GraphError(f"resistor {r.name} connects to ground; only rail-to-rail "
                             "resistors are supported")

    names = netlist.node_names()
    name_id = {n: i for i, n in enumerate(names)}
    locs = {}
    for n in names:
        try:
            locs[n] = parse_node_name(n)
        except NetlistError:
            if strict_names:
                raise
            locs[n] = None

    parent = list(range(len(names)))
    for r in netlist.resistors:
        if r.ohms == 0:
            a, b = _find(parent, name_id[r.node_a]), _find(parent, name_id[r.node_b])
            if a != b:
                # keep the earlier-appearing root so ids follow first appearance
                if a < b:
                    parent[b] = a
                else:
                    parent[a] = b

    index = {}
    root_to_idx = {}
    nodes, node_names = [], []
    for n in names:
        root = _find(parent, name_id[n])
        if root not in root_to_idx:
            root_to_idx[root] = len(nodes)
            nodes.append(locs[names[root]])
            node_names.append(names[root])
        index[n] = root_to_idx[root]

    eu, ev, ew = [], [], []
    dropped = 0
    for r in netlist.resistors:
        if r.ohms == 0:
            continue
        u, v = index[r.node_a], index[r.node_b]
        if u == v:
            dropped += 1
            continue
        eu.append(u)
        ev.append(v)
        ew.append(r.ohms)
    if dropped:
        log.warning("dropped %d resistors shorted by zero-ohm merges", dropped)

    injections: dict[int, float] = {}
    per_name: dict[str, float] = {}
    for s in netlist.current_sources:
        i = index[s.node]
        injections[i] = injections.get(i, 0.0) + s.amps
        per_name[s.node] = per_name.get(s.node, 0.0) + s.amps
    instances = [Instance(index[n], a, locs[n]) for n, a in per_name.items()]

    vnodes = frozenset(index[s.node] for s in netlist.voltage_sources)
    vlocs = list({s.node: locs[s.node] for s in netlist.voltage_sources}.values())

    graph = PdnGraph(
        nodes=nodes,
        names=node_names,
        index=index,
        edge_u=np.asarray(eu, dtype=np.int64),
        edge_v=np.asarray(ev, dtype=np.int64),
        edge_ohms=np.asarray(ew, dtype=np.float64),
        injections=injections,
        instances=instances,
        vsource_nodes=vnodes,
        vsource_locs=vlocs,
        vdd=float(vdd),
        resistors=[(locs[r.node_a], locs[r.node_b], r.ohms) for r in netlist.resistors],
    )
    if graph.n_nodes:
        max_deg = int(graph.degrees().max())
        if max_deg > MAX_PDN_DEGREE:
            log.warning("max node degree %d exceeds the usual PDN bound of %d",
                        max_deg, MAX_PDN_DEGREE)
    return graph


@dataclass
class Diagnostics:
    nodes: int
    edges: int
    instances: int
    vsources: int
    components: int
    floating_components: int
    max_degree: int
    floating_example: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def components(graph: PdnGraph) -> np.ndarray:
    """Connected-component label per node."""
    if graph.n_nodes == 0:
        return np.zeros(0, dtype=np.int64)
    _, labels = connected_components(graph.adjacency(), directed=False)
    return labels


def validate(graph: PdnGraph) -> Diagnostics:
    if graph.n_nodes == 0:
        return Diagnostics(0, 0, 0, 0, 0, 0, 0)
    labels = components(graph)
    n_comp = int(labels.max()) + 1
    sourced = np.zeros(n_comp, dtype=bool)
    for v in graph.vsource_nodes:
        sourced[labels[v]] = True
    floating = np.flatnonzero(~sourced)
    example = None
    if len(floating):
        example = graph.names[int(np.flatnonzero(labels == floating[0])[0])]
    return Diagnostics(
        nodes=graph.n_nodes,
        edges=graph.n_edges,
        instances=len(graph.instances),
        vsources=len(graph.vsource_nodes),
        components=n_comp,
        floating_components=len(floating),
        max_degree=int(graph.degrees().max()),
        floating_example=example,
    )
