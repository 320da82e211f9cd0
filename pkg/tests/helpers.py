"""Shared simulation fixtures for the cell and acceptance suites."""

from dataclasses import replace

import numpy as np

from memsim.cells import CellConfig, CellKind, StimulusPlan, testbench
from memsim.engine import run_transient
from memsim.netlist import PWL, VSource, validate

# D pulses (start, end) in clock periods: one inside a high phase, one inside a low phase
GLITCHES = ((2.2, 2.3), (3.6, 3.7))


def glitch_run(kind: CellKind, q0: int, config: CellConfig = CellConfig(), cycles: int = 6):
    """Hold D at ``q0`` but pulse it to the opposite level during both clock phases.

    Returns ``(times, q)`` for the cell output.
    """
    P, e, vdd = config.clock_period, config.edge_time, config.vdd
    plan = StimulusPlan(kind, {"d": (q0,) * cycles}, P, e, q0=q0)
    tb = testbench(kind, plan, config)
    lo, hi = q0 * vdd, (1 - q0) * vdd
    pts = [(0.0, lo)]
    for a, b in GLITCHES:
        pts += [(a * P, lo), (a * P + e, hi), (b * P, hi), (b * P + e, lo)]
    pts.append((cycles * P, lo))
    els = tuple(replace(x, spec=PWL(tuple(pts))) if isinstance(x, VSource) and x.pos == "d" else x
                for x in tb.elements)
    wf = run_transient(validate(replace(tb, elements=els, node_index=None)))
    keep = wf.times > P
    return wf.times[keep], wf.v("q")[keep]


def held(q: np.ndarray, q0: int, vdd: float, frac: float = 0.3) -> bool:
    """True when ``q`` never leaves the logic band of ``q0``."""
    if q0:
        return bool(np.min(q) >= (1 - frac) * vdd)
    return bool(np.max(q) <= frac * vdd)
