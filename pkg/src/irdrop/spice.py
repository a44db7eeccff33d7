"""SPICE netlist ingestion for resistive power delivery networks.

Only three element kinds are understood::

    R<name> <n1> <n2> <ohms>
    I<name> <node> 0 <amps>      # current drawn from node to ground
    V<name> <node> 0 <volts>

Lines starting with ``*`` are comments, ``.end`` stops parsing and any other
dot card (``.op`` and friends) is skipped.  Node names follow the contest
convention ``n<net>_m<layer>_<x>_<y>`` with coordinates in nm; ``0`` is ground.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import NetlistError

log = logging.getLogger(__name__)

GROUND = "0"

_LAYER_RE = re.compile(r"^[mM](\d+)$")
_INT_RE = re.compile(r"^\d+$")


@dataclass(frozen=True)
class Resistor:
    name: str
    node_a: str
    node_b: str
    ohms: float


@dataclass(frozen=True)
class CurrentSource:
    name: str
    node: str
    amps: float


@dataclass(frozen=True)
class VoltageSource:
    name: str
    node: str
    volts: float


@dataclass
class PdnNetlist:
    resistors: list[Resistor] = field(default_factory=list)
    current_sources: list[CurrentSource] = field(default_factory=list)
    voltage_sources: list[VoltageSource] = field(default_factory=list)
    line_count: int = 0

    def node_names(self) -> list[str]:
        """Distinct non-ground node names in order of first appearance."""
        seen = {}
        for r in self.resistors:
            seen.setdefault(r.node_a, None)
            seen.setdefault(r.node_b, None)
        for s in self.current_sources:
            seen.setdefault(s.node, None)
        for s in self.voltage_sources:
            seen.setdefault(s.node, None)
        seen.pop(GROUND, None)
        return list(seen)


@dataclass(frozen=True)
class NodeLoc:
    raw: str
    kind: str  # "internal" | "ground"
    layer: int = 0
    x: int = 0
    y: int = 0

    @property
    def is_ground(self) -> bool:
        return self.kind == "ground"


def parse_node_name(token: str) -> NodeLoc:
    """Decode ``0`` or ``<prefix..>_m<layer>_<x>_<y>`` into a NodeLoc.

    The layer token may sit anywhere before the two trailing coordinates, so
    variant prefixes (``n1_m1_..``, ``VDD_n1_m4_..``) decode the same way.
    """
    if token == GROUND:
        return NodeLoc(raw=token, kind="ground")
    parts = token.split("_")
    if len(parts) >= 3 and _INT_RE.match(parts[-1]) and _INT_RE.match(parts[-2]):
        layers = [m for m in (_LAYER_RE.match(p) for p in parts[:-2]) if m]
        if len(layers) == 1:
            layer = int(layers[0].group(1))
            if layer >= 1:
                return NodeLoc(raw=token, kind="internal", layer=layer,
                               x=int(parts[-2]), y=int(parts[-1]))
    raise NetlistError(f"cannot decode node name {token!r} "
                       "(expected '0' or '<prefix>_m<layer>_<x>_<y>')")


def _value(text: str, lineno: int, line: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise NetlistError(f"bad numeric value {text!r}", lineno, line) from None
    if not math.isfinite(v):
        raise NetlistError(f"non-finite value {text!r}", lineno, line)
    return v


def parse_netlist(text: str) -> PdnNetlist:
    """Parse netlist text; elements come back in file order."""
    net = PdnNetlist()
    names = {"R": set(), "I": set(), "V": set()}
    lineno = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("*"):
            continue
        if line.startswith("."):
            if line.split()[0].lower() == ".end":
                break
            log.debug("skipping control card on line %d: %s", lineno, line)
            continue
        fields = line.split()
        kind = fields[0][0].upper()
        if kind not in names:
            raise NetlistError(f"unknown element letter {fields[0][0]!r}", lineno, raw)
        if len(fields) != 4:
            raise NetlistError(f"expected 4 fields, got {len(fields)}", lineno, raw)
        name, n1, n2, val = fields
        if name in names[kind]:
            raise NetlistError(f"duplicate element name {name!r}", lineno, raw)
        names[kind].add(name)
        v = _value(val, lineno, raw)
        if kind == "R":
            if v < 0:
                raise NetlistError("negative resistance", lineno, raw)
            net.resistors.append(Resistor(name, n1, n2, v))
            continue
        if n2 != GROUND or n1 == GROUND:
            raise NetlistError("sources must connect a node to ground '0'", lineno, raw)
        if kind == "I":
            if v < 0:
                raise NetlistError("negative current source", lineno, raw)
            net.current_sources.append(CurrentSource(name, n1, v))
        else:
            if v <= 0:
                raise NetlistError("voltage source must be positive", lineno, raw)
            net.voltage_sources.append(VoltageSource(name, n1, v))
    net.line_count = lineno
    return net


def read_netlist(path) -> PdnNetlist:
    return parse_netlist(Path(path).read_text(encoding="utf-8"))


def format_netlist(net: PdnNetlist) -> str:
    """Canonical text form; ``parse_netlist(format_netlist(n))`` reproduces n's elements."""
    out = []
    for r in net.resistors:
        out.append(f"{r.name} {r.node_a} {r.node_b} {r.ohms!r}")
    for s in net.current_sources:
        out.append(f"{s.name} {s.node} 0 {s.amps!r}")
    for s in net.voltage_sources:
        out.append(f"{s.name} {s.node} 0 {s.volts!r}")
    out.append(".end")
    return "\n".join(out) + "\n"
