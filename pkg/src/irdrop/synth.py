"""Synthetic rectilinear PDN netlists for tests, benchmarks and demos.

Layout: horizontal m1 rails carrying the instance loads, vertical m4 straps
above them, vias wherever a strap crosses a rail, and VDD pads on a coarse
lattice of m4 nodes.
"""

from __future__ import annotations

import numpy as np

# Case edge lengths (cells) seen in the contest/BeGAN corpora.
CASE_EDGE_RANGE = (201, 930)


def random_case_size(rng: np.random.Generator) -> tuple[int, int]:
    lo, hi = CASE_EDGE_RANGE
    h, w = rng.integers(lo, hi + 1, size=2)
    return int(h), int(w)


def synthetic_netlist(
    width_um: int = 40,
    height_um: int = 40,
    *,
    m1_pitch: int = 2,
    m1_step: int = 1,
    m4_pitch: int = 8,
    pad_pitch: int = 16,
    m1_ohm_per_um: float = 0.4,
    m4_ohm_per_um: float = 0.05,
    via_ohm: float = 0.2,
    load_fraction: float = 0.5,
    max_current: float = 1e-3,
    jitter: float = 0.0,
    vdd: float = 1.1,
    seed: int = 0,
) -> str:
    """Return netlist text for a two-layer grid.

    ``m4_pitch`` and ``pad_pitch`` must be multiples of ``m1_step`` and
    ``m1_pitch`` respectively so straps land on m1 nodes.  ``jitter`` scales
    every resistor by an independent factor drawn from [1 - jitter, 1 + jitter].
    """
    if m4_pitch % m1_step or pad_pitch % m1_pitch or pad_pitch % m4_pitch:
        raise ValueError("m4_pitch must be a multiple of m1_step, and pad_pitch "
                         "a multiple of both m1_pitch and m4_pitch")
    rng = np.random.default_rng(seed)
    um = 1000
    lines = [f"* synthetic PDN {width_um}x{height_um} um, seed {seed}"]
    counter = {"R": 0, "I": 0, "V": 0}

    def name(kind):
        counter[kind] += 1
        return f"{kind}{counter[kind]}"

    def ohms(base):
        if jitter:
            base *= rng.uniform(1.0 - jitter, 1.0 + jitter)
        return base

    def node(layer, x, y):
        return f"n1_m{layer}_{x * um}_{y * um}"

    xs1 = range(0, width_um + 1, m1_step)
    ys1 = range(0, height_um + 1, m1_pitch)
    for y in ys1:
        for x0, x1 in zip(xs1, xs1[1:]):
            lines.append(f"{name('R')} {node(1, x0, y)} {node(1, x1, y)} "
                         f"{ohms(m1_ohm_per_um * (x1 - x0))!r}")
    xs4 = range(0, width_um + 1, m4_pitch)
    for x in xs4:
        for y0, y1 in zip(ys1, ys1[1:]):
            lines.append(f"{name('R')} {node(4, x, y0)} {node(4, x, y1)} "
                         f"{ohms(m4_ohm_per_um * (y1 - y0))!r}")
        for y in ys1:
            lines.append(f"{name('R')} {node(4, x, y)} {node(1, x, y)} {ohms(via_ohm)!r}")
    for y in ys1:
        for x in xs1:
            if rng.random() < load_fraction:
                amps = rng.uniform(0.05, 1.0) * max_current
                lines.append(f"{name('I')} {node(1, x, y)} 0 {amps!r}")
    for x in range(0, width_um + 1, pad_pitch):
        for y in range(0, height_um + 1, pad_pitch):
            lines.append(f"{name('V')} {node(4, x, y)} 0 {vdd!r}")
    lines.append(".end")
    return "\n".join(lines) + "\n"
