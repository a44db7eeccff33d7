import numpy as np
import pytest

from irdrop.graph import build_graph
from irdrop.spice import parse_netlist
from irdrop.synth import synthetic_netlist


def random_pdn(seed, max_nodes=500):
    """Small synthetic two-layer PDN with jittered resistances."""
    rng = np.random.default_rng(seed)
    while True:
        w = int(rng.integers(6, 24))
        h = 2 * int(rng.integers(3, 10))
        m4 = int(rng.choice([2, 4]))
        text = synthetic_netlist(
            w, h, m1_pitch=2, m1_step=1, m4_pitch=m4, pad_pitch=2 * m4 * int(rng.integers(1, 3)),
            jitter=0.5, load_fraction=float(rng.uniform(0.2, 0.9)), seed=int(rng.integers(1 << 31)),
        )
        g = build_graph(parse_netlist(text))
        if g.n_nodes <= max_nodes:
            return g


def random_graph_netlist(seed, n=60, extra=None, sources=3, loads=None):
    """Random connected net with abstract node names (spanning tree plus chords)."""
    rng = np.random.default_rng(seed)
    extra = n if extra is None else extra
    lines = []
    k = 0
    for i in range(1, n):
        j = int(rng.integers(i))
        k += 1
        lines.append(f"R{k} N{j} N{i} {rng.uniform(0.1, 5.0)!r}")
    for _ in range(extra):
        i, j = rng.choice(n, size=2, replace=False)
        k += 1
        lines.append(f"R{k} N{i} N{j} {rng.uniform(0.1, 5.0)!r}")
    loads = n // 2 if loads is None else loads
    for t, i in enumerate(rng.choice(n, size=loads, replace=False)):
        lines.append(f"I{t} N{i} 0 {rng.uniform(1e-4, 1e-2)!r}")
    for t, i in enumerate(rng.choice(n, size=sources, replace=False)):
        lines.append(f"V{t} N{i} 0 1.1")
    return "\n".join(lines) + "\n.end\n"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
