"""Static IR drop prediction toolkit.

Netlist ingestion, golden conductance solves, feature-map extraction,
spatial augmentation, contest metrics and a numpy forward pass of an
attention-based Inception U-Net.
"""

from .errors import (
    IrdropError,
    NetlistError,
    GraphError,
    SingularSystemError,
    ConvergenceError,
    ShapeError,
    FormatError,
    ConfigError,
)
from .spice import PdnNetlist, NodeLoc, parse_netlist, parse_node_name, read_netlist
from .graph import PdnGraph, Instance, build_graph, validate
from .solver import LinearSystem, NodeVoltages, assemble_system, solve_cg, ir_drop_map, solve_ir_drop
from .features import FeatureMap, MapStack, extract_all, CHANNELS

__version__ = "0.1.0"

__all__ = [
    "IrdropError", "NetlistError", "GraphError", "SingularSystemError",
    "ConvergenceError", "ShapeError", "FormatError", "ConfigError",
    "PdnNetlist", "NodeLoc", "parse_netlist", "parse_node_name", "read_netlist",
    "PdnGraph", "Instance", "build_graph", "validate",
    "LinearSystem", "NodeVoltages", "assemble_system", "solve_cg", "ir_drop_map",
    "solve_ir_drop", "FeatureMap", "MapStack", "extract_all", "CHANNELS",
]
