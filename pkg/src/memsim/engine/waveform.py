"""Transient results and their CSV export."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Waveform:
    """Uniformly sampled node voltages, source currents and memristor states.

    Source currents follow the SPICE sign convention: positive current flows
    into the ``n+`` terminal, so a source delivering power has ``v * i < 0``.
    """

    times: np.ndarray
    node_names: tuple
    source_names: tuple
    memristor_names: tuple
    voltages: np.ndarray  # (steps, nodes)
    currents: np.ndarray  # (steps, sources)
    states: np.ndarray  # (steps, memristors)
    source_terminals: tuple = ()  # (pos, neg) node pair per source

    def __post_init__(self):
        for arr in (self.times, self.voltages, self.currents, self.states):
            arr.setflags(write=False)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def v(self, node: str) -> np.ndarray:
        if node == "0":
            return np.zeros_like(self.times)
        try:
            return self.voltages[:, self.node_names.index(node)]
        except ValueError:
            raise KeyError(f"unknown node {node!r}") from None

    def i(self, source: str) -> np.ndarray:
        try:
            return self.currents[:, self.source_names.index(source)]
        except ValueError:
            raise KeyError(f"unknown voltage source {source!r}") from None

    def w(self, memristor: str) -> np.ndarray:
        try:
            return self.states[:, self.memristor_names.index(memristor)]
        except ValueError:
            raise KeyError(f"unknown memristor {memristor!r}") from None

    def source_voltage(self, source: str) -> np.ndarray:
        if not self.source_terminals:
            raise ValueError("waveform carries no source terminal information")
        pos, neg = self.source_terminals[self.source_names.index(source)]
        return self.v(pos) - self.v(neg)

    def delivered_power(self) -> np.ndarray:
        """Instantaneous power delivered by all sources, sum of ``-v * i``."""
        total = np.zeros_like(self.times)
        for name in self.source_names:
            total -= self.source_voltage(name) * self.i(name)
        return total

    def shifted(self, offset: float) -> "Waveform":
        return Waveform(self.times + offset, self.node_names, self.source_names,
                        self.memristor_names, self.voltages.copy(), self.currents.copy(),
                        self.states.copy(), self.source_terminals)

    def to_csv(self) -> str:
        header = (["time_s"] + [f"v({n})" for n in self.node_names]
                  + [f"i({s})" for s in self.source_names]
                  + [f"w({m})" for m in self.memristor_names])
        data = np.column_stack([self.times, self.voltages, self.currents, self.states])
        buf = io.StringIO()
        buf.write(",".join(header) + "\n")
        np.savetxt(buf, data, fmt="%.12e", delimiter=",")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())
