
import numpy as np
import pytest
from hypothesis import given, strategies as st

from irdrop.errors import GraphError, ShapeError
from irdrop.features import (
    CHANNELS, current_map, effective_distance, effective_distance_map, extract_all,
    multi_source_dijkstra, pdn_density_map, resistance_map, resistor_cells,
    resistor_count_map, shortest_path_maps,
)
from irdrop.graph import build_graph
from irdrop.grid import Extent, rasterize
from irdrop.solver import graph_extent
from irdrop.spice import parse_netlist
from irdrop.synth import synthetic_netlist

from conftest import random_graph_netlist
from oracles import bellman_ford, segment_cells


def n(layer, x, y):
    return f"n1_m{layer}_{x}_{y}"


def net(resistors=(), loads=(), pads=()):
    lines = [f"R{i} {a} {b} {r!r}" for i, (a, b, r) in enumerate(resistors)]
    lines += [f"I{i} {a} 0 {c!r}" for i, (a, c) in enumerate(loads)]
    lines += [f"V{i} {a} 0 1.1" for i, a in enumerate(pads)]
    return build_graph(parse_netlist("\n".join(lines)))


# -- rasterize ----------------------------------------------------------------

@pytest.mark.parametrize("mode", ["average", "sum"])
def test_rasterize_single_point(mode):
    m = rasterize([1500], [2500], [5.0], Extent(3, 3), mode=mode)
    expect = np.zeros((3, 3))
    expect[2, 1] = 5.0
    np.testing.assert_array_equal(m.data, expect)


def test_rasterize_average_and_sum():
    xs, ys, vals = [100, 900], [0, 999], [2.0, 4.0]
    assert rasterize(xs, ys, vals, Extent(1, 1), mode="average").data[0, 0] == 3.0
    assert rasterize(xs, ys, vals, Extent(1, 1), mode="sum").data[0, 0] == 6.0


def test_rasterize_outside_extent():
    with pytest.raises(ShapeError):
        rasterize([3000], [0], [1.0], Extent(1, 3))


def test_extent_rounding():
    e = Extent.covering([0, 4800], [0, 2400], 1000)
    assert (e.h, e.w) == (3, 5)


# -- current ------------------------------------------------------------------

def test_current_map_single_and_sum():
    g = net([(n(1, 0, 0), n(1, 2000, 0), 1), (n(1, 2000, 0), n(1, 2500, 0), 1)],
            loads=[(n(1, 0, 0), 3e-3), (n(1, 2000, 0), 1e-3), (n(1, 2500, 0), 2e-3)],
            pads=[n(1, 0, 0)])
    m = current_map(g)
    assert m.unit == "A"
    np.testing.assert_allclose(m.data, [[3e-3, 0, 3e-3]], rtol=1e-15)


def test_current_map_empty():
    g = net([(n(1, 0, 0), n(1, 2000, 0), 1)], pads=[n(1, 0, 0)])
    assert not current_map(g).data.any()


# -- effective distance -------------------------------------------------------

def test_effective_distance_examples():
    assert effective_distance([[5.0]])[0] == 5.0
    assert effective_distance([[4.0, 4.0]])[0] == 2.0
    assert effective_distance([[3.0, 6.0]])[0] == pytest.approx(2.0, rel=1e-15)
    assert effective_distance([[0.0, 6.0]])[0] == 0.0


def test_effective_distance_needs_sources():
    with pytest.raises(GraphError):
        effective_distance(np.zeros((1, 0)))


def test_effective_distance_map_geometry():
    # instance at (3 um, 4 um) from a pad at the origin -> 5 um
    g = net([(n(1, 0, 0), n(1, 0, 4000), 1), (n(1, 0, 4000), n(1, 3000, 4000), 1)],
            loads=[(n(1, 3000, 4000), 1e-3)], pads=[n(1, 0, 0)])
    m = effective_distance_map(g)
    assert m.unit == "um"
    assert m.data[4, 3] == pytest.approx(5.0, rel=1e-15)


@given(st.lists(st.floats(1e-3, 1e4), min_size=1, max_size=30))
def test_harmonic_bound(d):
    de = effective_distance([d])[0]
    assert de <= min(d)
    if len(d) == 1:
        assert de == d[0]
    else:
        assert de < min(d)


# -- shortest paths -----------------------------------------------------------

def chain(weights, pad_ends):
    nodes = [n(1, 1000 * i, 0) for i in range(len(weights) + 1)]
    res = [(nodes[i], nodes[i + 1], w) for i, w in enumerate(weights)]
    pads = [nodes[0]] + ([nodes[-1]] if pad_ends == 2 else [])
    return net(res, loads=[(x, 1e-3) for x in nodes], pads=pads)


def test_chain_distances():
    g = chain([1, 2, 3], 1)
    np.testing.assert_array_equal(multi_source_dijkstra(g, g.vsource_nodes), [0, 1, 3, 6])


def test_chain_both_ends():
    g = chain([1, 2, 3], 2)
    np.testing.assert_array_equal(multi_source_dijkstra(g, g.vsource_nodes), [0, 1, 3, 0])


def test_dijkstra_needs_sources():
    g = chain([1], 1)
    with pytest.raises(GraphError):
        multi_source_dijkstra(g, [])


@pytest.mark.parametrize("seed", range(10))
def test_dijkstra_vs_bellman_ford_and_min_of_singles(seed):
    g = build_graph(parse_netlist(random_graph_netlist(seed, n=50, extra=40, sources=4)),
                    strict_names=False)
    multi = multi_source_dijkstra(g, g.vsource_nodes)
    np.testing.assert_array_equal(multi, bellman_ford(g.n_nodes, g.edges, g.vsource_nodes))
    singles = np.min([multi_source_dijkstra(g, [s]) for s in g.vsource_nodes], axis=0)
    np.testing.assert_array_equal(multi, singles)


def test_unreachable_warns_and_maps_zero():
    g = net([(n(1, 0, 0), n(1, 1000, 0), 2.0), (n(1, 3000, 0), n(1, 4000, 0), 1.0)],
            loads=[(n(1, 1000, 0), 0.01), (n(1, 4000, 0), 0.01)], pads=[n(1, 0, 0)])
    with pytest.warns(RuntimeWarning, match="unreachable"):
        res, volt = shortest_path_maps(g)
    np.testing.assert_allclose(res.data, [[0, 2, 0, 0, 0]])
    np.testing.assert_allclose(volt.data, [[0, 0.02, 0, 0, 0]])


def test_sp_maps_rules():
    g = net([(n(1, 0, 0), n(1, 5000, 0), 2.0), (n(1, 0, 0), n(1, 5100, 0), 4.0)],
            loads=[(n(1, 5000, 0), 0.01), (n(1, 5100, 0), 0.01), (n(1, 0, 0), 0.5)],
            pads=[n(1, 0, 0)])
    res, volt = shortest_path_maps(g)
    assert res.unit == "ohm" and volt.unit == "V"
    assert res.data[0, 5] == 3.0
    assert volt.data[0, 5] == pytest.approx(0.03)
    assert res.data[0, 0] == 0.0 and volt.data[0, 0] == 0.0


def test_sp_voltage_multiplication():
    g = net([(n(1, 0, 0), n(1, 1000, 0), 2.0)], loads=[(n(1, 1000, 0), 0.01)], pads=[n(1, 0, 0)])
    _, volt = shortest_path_maps(g)
    assert volt.data[0, 1] == pytest.approx(0.02, rel=1e-15)


# -- resistor geometry --------------------------------------------------------

def test_horizontal_resistor_four_cells():
    g = net([(n(1, 0, 500), n(1, 3000, 500), 2.0)], pads=[n(1, 0, 500)])
    np.testing.assert_array_equal(resistor_count_map(g).data, [[1, 1, 1, 1]])
    np.testing.assert_allclose(resistance_map(g).data, [[0.5, 0.5, 0.5, 0.5]])


def test_via_single_cell():
    g = net([(n(1, 1500, 1500), n(4, 1500, 1500), 0.8)], pads=[n(4, 1500, 1500)])
    cnt = resistor_count_map(g).data
    assert cnt[1, 1] == 1 and cnt.sum() == 1
    res = resistance_map(g).data
    assert res[1, 1] == 0.8 and res.sum() == 0.8


def test_diagonal_rejected():
    g = net([(n(1, 0, 0), n(1, 1000, 1000), 1.0)], pads=[n(1, 0, 0)])
    with pytest.raises(GraphError, match="diagonal"):
        resistor_count_map(g)


@pytest.mark.parametrize("seed", range(5))
def test_count_map_vs_brute_force(seed):
    rng = np.random.default_rng(seed)
    res = []
    for _ in range(40):
        x, y = rng.integers(0, 9000, size=2)
        ln = int(rng.integers(0, 4000))
        kind = rng.integers(3)
        if kind == 0:
            res.append((n(1, x, y), n(1, x + ln, y), rng.uniform(0.1, 3)))
        elif kind == 1:
            res.append((n(2, x, y), n(2, x, y + ln), rng.uniform(0.1, 3)))
        else:
            res.append((n(1, x, y), n(2, x, y), rng.uniform(0.1, 3)))
    g = net(res, pads=[res[0][0]])
    ext = graph_extent(g)
    expect = np.zeros((ext.h, ext.w))
    for a, b, _ in g.resistors:
        for r, c in segment_cells(a.x, a.y, b.x, b.y, ext.cell_nm, ext.h, ext.w):
            expect[r, c] += 1
    np.testing.assert_array_equal(resistor_count_map(g).data, expect)
    total = sum(r for _, _, r in g.resistors)
    assert resistance_map(g).data.sum() == pytest.approx(total, rel=1e-9)


def test_resistor_cells_spans():
    g = net([(n(1, 0, 0), n(1, 2000, 0), 1.0), (n(1, 0, 0), n(3, 0, 0), 1.0)], pads=[n(1, 0, 0)])
    _, _, span = resistor_cells(g, graph_extent(g))
    assert span.tolist() == [3, 1]


# -- PDN density --------------------------------------------------------------

def rails(layer, orient, pitch_um, length_um, count):
    out = []
    for k in range(count):
        c = k * pitch_um * 1000
        for s in range(length_um):
            if orient == "v":
                out.append((n(layer, c, s * 1000), n(layer, c, (s + 1) * 1000), 0.1))
            else:
                out.append((n(layer, s * 1000, c), n(layer, (s + 1) * 1000, c), 0.1))
    return out


def test_density_vertical_rails_every_two_um():
    g = net(rails(1, "v", 2, 8, 5), pads=[n(1, 0, 0)])
    d = pdn_density_map(g).data
    assert d.shape == (9, 9)
    covered = resistor_count_map(g).data > 0
    np.testing.assert_array_equal(d[covered], 0.5)
    assert not d[~covered].any()
    assert covered[:, ::2].all()


def test_density_no_rails():
    g = net([(n(1, 1000, 1000), n(4, 1000, 1000), 0.1)], pads=[n(4, 1000, 1000)])
    assert not pdn_density_map(g).data.any()


def test_density_single_rail_contributes_zero():
    g = net(rails(1, "v", 2, 4, 1), pads=[n(1, 0, 0)])
    assert not pdn_density_map(g).data.any()


def test_density_two_layers_add():
    g = net(rails(1, "v", 2, 8, 5) + rails(2, "h", 4, 8, 3), pads=[n(1, 0, 0)])
    d = pdn_density_map(g).data
    assert d[0, 0] == 0.75   # both groups pass through cell (0, 0)
    assert d[0, 1] == 0.25   # only the horizontal rail
    assert d[1, 0] == 0.5    # only the vertical rail


# -- stack --------------------------------------------------------------------

def test_extract_all_shapes():
    g = build_graph(parse_netlist(synthetic_netlist(20, 12, seed=3, m4_pitch=4, pad_pitch=8)))
    s = extract_all(g)
    assert s.c == 7 and s.names == CHANNELS
    s8 = extract_all(g, truth_solver=True)
    assert s8.c == 8 and s8.names[-1] == "ir_drop" and s8.units[-1] == "V"
    np.testing.assert_array_equal(s8.data[:7], s.data)
    assert np.isfinite(s8.data).all()


def test_extract_all_needs_instances():
    g = net([(n(1, 0, 0), n(1, 1000, 0), 1.0)], pads=[n(1, 0, 0)])
    with pytest.raises(GraphError):
        extract_all(g)


def shift_text(text, dx, dy):
    def move(tok):
        if tok.startswith("n1_m"):
            parts = tok.split("_")
            return "_".join(parts[:2] + [str(int(parts[2]) + dx), str(int(parts[3]) + dy)])
        return tok
    return "\n".join(" ".join(move(t) for t in line.split()) for line in text.splitlines())


@pytest.mark.parametrize("seed", range(3))
def test_translation_covariance(seed):
    text = synthetic_netlist(16, 12, seed=seed, m4_pitch=4, pad_pitch=8, jitter=0.3)
    a = extract_all(build_graph(parse_netlist(text)), truth_solver=True)
    b = extract_all(build_graph(parse_netlist(shift_text(text, 1000, 1000))), truth_solver=True)
    assert b.data.shape == (8, a.h + 1, a.w + 1)
    np.testing.assert_allclose(b.data[:, 1:, 1:], a.data, rtol=1e-9, atol=1e-15)
    assert not b.data[:, 0, :].any() and not b.data[:, :, 0].any()
