import logging

import numpy as np
import pytest

from irdrop.errors import GraphError
from irdrop.graph import build_graph, validate
from irdrop.spice import parse_netlist
from irdrop.synth import synthetic_netlist


def g(text, **kw):
    return build_graph(parse_netlist(text), strict_names=False, **kw)


def test_direct_construction():
    graph = g("R1 A B 1\nI1 B 0 0.1\nV1 A 0 1.1\n")
    assert graph.n_nodes == 2
    assert graph.n_edges == 1
    assert graph.injections == {1: 0.1}
    assert graph.vsource_nodes == {0}
    assert graph.vdd == 1.1


def test_zero_ohm_merge():
    base = g("R1 A B 1\nR2 B C 1\nI1 C 0 0.1\nV1 A 0 1.1\n")
    merged = g("R1 A B 0\nR2 B C 1\nI1 C 0 0.1\nV1 A 0 1.1\n")
    assert merged.index["A"] == merged.index["B"] == 0
    assert merged.n_nodes == base.n_nodes - 1
    assert merged.n_edges == base.n_edges - 1


def test_resistor_shorted_by_merge_is_dropped():
    graph = g("R1 A B 0\nR2 A B 5\nV1 A 0 1.1\n")
    assert graph.n_nodes == 1 and graph.n_edges == 0
    assert len(graph.resistors) == 2  # still physical resistors for the maps


def test_currents_sum_per_node():
    graph = g("R1 A B 1\nI1 B 0 0.1\nI2 B 0 0.2\nV1 A 0 1.1\n")
    assert graph.injections == {1: pytest.approx(0.3)}
    assert len(graph.instances) == 1


def test_parallel_resistors_kept():
    graph = g("R1 A B 1\nR2 A B 2\nV1 A 0 1.1\n")
    assert graph.n_edges == 2


def test_mixed_rail_rejected():
    with pytest.raises(GraphError, match="mixed-rail"):
        g("R1 A B 1\nV1 A 0 1.1\nV2 B 0 0.9\n")


def test_custom_vdd():
    assert g("R1 A B 1\nV1 A 0 0.9\n", vdd=0.9).vdd == 0.9


def test_strict_names_reject_abstract_nodes():
    from irdrop.errors import NetlistError
    with pytest.raises(NetlistError):
        build_graph(parse_netlist("R1 A B 1\n"))


def test_validate_connected():
    d = validate(g("R1 A B 1\nR2 B C 1\nV1 A 0 1.1\n"))
    assert (d.components, d.floating_components) == (1, 0)


def test_validate_floating():
    d = validate(g("R1 A B 1\nR2 C D 1\nV1 A 0 1.1\n"))
    assert d.components == 2 and d.floating_components == 1
    assert d.floating_example in ("C", "D")


def test_validate_empty():
    d = validate(g(""))
    assert d.to_dict() == {"nodes": 0, "edges": 0, "instances": 0, "vsources": 0,
                           "components": 0, "floating_components": 0, "max_degree": 0,
                           "floating_example": None}


def test_degree_warning(caplog):
    star = "".join(f"R{i} H L{i} 1\n" for i in range(8)) + "V1 H 0 1.1\n"
    with caplog.at_level(logging.WARNING, logger="irdrop.graph"):
        graph = g(star)
    assert validate(graph).max_degree == 8
    assert "degree" in caplog.text


@pytest.mark.parametrize("seed", range(5))
def test_conservation_and_determinism(seed):
    text = synthetic_netlist(20, 12, seed=seed, m4_pitch=4, pad_pitch=8)
    net = parse_netlist(text)
    a, b = build_graph(net), build_graph(net)
    assert a.index == b.index
    np.testing.assert_array_equal(a.edge_u, b.edge_u)
    assert sum(a.injections.values()) == pytest.approx(sum(s.amps for s in net.current_sources), rel=1e-12)
    assert a.n_nodes <= len(net.node_names())
