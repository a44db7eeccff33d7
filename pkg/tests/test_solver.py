import numpy as np
import pytest

from irdrop.errors import ConvergenceError, GraphError, SingularSystemError
from irdrop.graph import build_graph
from irdrop.solver import assemble_system, ir_drop_map, solve_cg, solve_ir_drop
from irdrop.spice import parse_netlist

from conftest import random_graph_netlist, random_pdn
from oracles import dense_node_voltages


def g(text):
    return build_graph(parse_netlist(text), strict_names=False)


ONE = "V1 S 0 1.1\nR1 S A 1\nI1 A 0 0.1\n"
SERIES = "V1 S 0 1.1\nR1 S A 1\nR2 A B 1\nI1 B 0 0.1\n"


def oracle(graph):
    return dense_node_voltages(graph.n_nodes, graph.edges, graph.injections,
                               graph.vsource_nodes, graph.vdd)


def test_one_unknown_stamp():
    s = assemble_system(g(ONE))
    assert s.dim == 1
    np.testing.assert_allclose(s.G.toarray(), [[1.0]])
    np.testing.assert_allclose(s.J, [1.0])


def test_series_stamps():
    s = assemble_system(g(SERIES))
    np.testing.assert_allclose(s.G.toarray(), [[2, -1], [-1, 1]])
    np.testing.assert_allclose(s.J, [1.1, -0.1])


def test_floating_node_named():
    with pytest.raises(SingularSystemError, match="C"):
        assemble_system(g(ONE + "R9 C D 1\n"))


def test_one_resistor_solution():
    graph = g(ONE)
    v = solve_ir_drop(graph)
    assert v.volts[graph.index["A"]] == pytest.approx(1.0, abs=1e-12)
    assert v.volts[graph.index["S"]] == 1.1


def test_series_solution():
    graph = g(SERIES)
    v = solve_ir_drop(graph)
    assert v.volts[graph.index["A"]] == pytest.approx(1.0, abs=1e-12)
    assert v.volts[graph.index["B"]] == pytest.approx(0.9, abs=1e-12)


def test_bad_tolerance():
    with pytest.raises(ValueError):
        solve_cg(assemble_system(g(ONE)), tol=0)


def test_non_convergence_reports_residual():
    graph = g(random_graph_netlist(3, n=80))
    with pytest.raises(ConvergenceError) as e:
        solve_cg(assemble_system(graph), tol=1e-14, max_iter=2)
    assert e.value.residual > 1e-14


def test_symmetric_diagonally_dominant():
    s = assemble_system(random_pdn(4))
    G = s.G.toarray()
    np.testing.assert_array_equal(G, G.T)
    assert (np.diag(G) > 0).all()
    assert (np.diag(G) >= np.abs(G).sum(axis=1) - np.diag(G) - 1e-12).all()
    assert s.dim == random_pdn(4).n_nodes - len(random_pdn(4).vsource_nodes)


@pytest.mark.parametrize("seed", range(8))
def test_random_graph_matches_dense_lu(seed):
    graph = g(random_graph_netlist(seed, n=200, extra=150))
    v = solve_ir_drop(graph)
    np.testing.assert_allclose(v.volts, oracle(graph), atol=1e-8, rtol=0)


@pytest.mark.parametrize("seed", range(5))
def test_current_conservation(seed):
    graph = random_pdn(seed)
    v = solve_ir_drop(graph)
    fixed = graph.vsource_nodes
    out = 0.0
    for a, b, r in graph.edges:
        if (a in fixed) != (b in fixed):
            src, dst = (a, b) if a in fixed else (b, a)
            out += (v.volts[src] - v.volts[dst]) / r
    assert out == pytest.approx(sum(graph.injections.values()), rel=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_bounds(seed):
    graph = random_pdn(seed)
    drop = solve_ir_drop(graph).ir_drop
    assert (drop >= -1e-12).all() and (drop <= graph.vdd).all()


@pytest.mark.parametrize("seed", range(4))
def test_monotone_in_load(seed):
    rng = np.random.default_rng(seed)
    graph = g(random_graph_netlist(seed, n=40))
    base = oracle(graph)
    node = int(rng.choice(list(graph.injections)))
    graph.injections[node] += 0.01
    bumped = oracle(graph)
    cg = solve_ir_drop(graph).volts
    assert (graph.vdd - bumped >= graph.vdd - base - 1e-12).all()
    np.testing.assert_allclose(cg, bumped, atol=1e-8)


def test_map_single_instance():
    graph = build_graph(parse_netlist(
        "V1 n1_m1_0_0 0 1.1\nR1 n1_m1_0_0 n1_m1_2000_0 1\nI1 n1_m1_2000_0 0 0.1\n"))
    fmap = ir_drop_map(graph, solve_ir_drop(graph))
    assert fmap.unit == "V" and fmap.data.shape == (1, 3)
    np.testing.assert_allclose(fmap.data, [[0, 0, 0.1]], atol=1e-12)


def test_map_averages_shared_cell():
    graph = build_graph(parse_netlist(
        "V1 n1_m1_0_0 0 1.1\nR1 n1_m1_0_0 n1_m1_100_0 1\nI1 n1_m1_100_0 0 0.1\n"
        "R2 n1_m1_0_0 n1_m1_200_0 3\nI2 n1_m1_200_0 0 0.1\n"))
    fmap = ir_drop_map(graph, solve_ir_drop(graph))
    assert fmap.data.shape == (1, 1)
    assert fmap.data[0, 0] == pytest.approx(0.2, abs=1e-12)


def test_ladder_map_vs_oracle():
    # rungs to the rail: each instance sees its own hand-checkable drop
    text = "V1 n1_m1_0_0 0 1.1\n"
    for k in range(1, 6):
        text += f"R{k} n1_m1_{(k - 1) * 1000}_0 n1_m1_{k * 1000}_0 0.5\n"
        text += f"I{k} n1_m1_{k * 1000}_0 0 {k * 1e-3}\n"
    graph = build_graph(parse_netlist(text))
    fmap = ir_drop_map(graph, solve_ir_drop(graph))
    ref = oracle(graph)
    expect = np.zeros((1, 6))
    for inst in graph.instances:
        expect[0, inst.loc.x // 1000] = graph.vdd - ref[inst.node]
    np.testing.assert_allclose(fmap.data, expect, atol=1e-12)
    # hand solution: segment k carries the sum of loads beyond it
    loads = np.arange(1, 6) * 1e-3
    seg = loads[::-1].cumsum()[::-1] * 0.5
    np.testing.assert_allclose(fmap.data[0, 1:], seg.cumsum(), atol=1e-12)


def test_map_needs_instances():
    graph = build_graph(parse_netlist("V1 n1_m1_0_0 0 1.1\nR1 n1_m1_0_0 n1_m1_1_0 1\n"))
    with pytest.raises(GraphError):
        ir_drop_map(graph, solve_ir_drop(graph))
