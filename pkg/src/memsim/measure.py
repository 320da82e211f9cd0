"""Logic decisions, delay, power and comparison reports from waveforms."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cells import GATES, INPUTS, CellKind, StimulusPlan, golden_sequence, output_node
from .engine.waveform import Waveform
from .netlist import ComponentCount

INDETERMINATE = "X"

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


class MeasurementError(ValueError):
    """A metric cannot be computed from the given waveform."""


@dataclass(frozen=True)
class ThresholdConfig:
    v_high: float
    v_low: float

    def __post_init__(self):
        if not self.v_low < self.v_high:
            raise ValueError("need v_low < v_high")

    @classmethod
    def for_vdd(cls, vdd: float, high_frac: float = 0.7, low_frac: float = 0.3) -> "ThresholdConfig":
        if not 0.0 <= low_frac < high_frac < 1.0:
            raise ValueError("need 0 <= low fraction < high fraction < 1")
        return cls(high_frac * vdd, low_frac * vdd)


def _span_check(waveform: Waveform, times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    lo, hi = waveform.times[0], waveform.times[-1]
    eps = 1e-9 * max(abs(hi), 1e-30)
    if t.size and (t.min() < lo - eps or t.max() > hi + eps):
        raise MeasurementError(f"sample times must lie within [{lo:g}, {hi:g}] s")
    return t


def sample(waveform: Waveform, node: str, times) -> np.ndarray:
    t = _span_check(waveform, times)
    return np.interp(t, waveform.times, waveform.v(node))


def to_logic(waveform: Waveform, node: str, thresholds: ThresholdConfig, times) -> list:
    """1 at or above ``v_high``, 0 at or below ``v_low``, otherwise INDETERMINATE."""
    out = []
    for v in sample(waveform, node, times):
        if v >= thresholds.v_high:
            out.append(1)
        elif v <= thresholds.v_low:
            out.append(0)
        else:
            out.append(INDETERMINATE)
    return out


def crossings(times: np.ndarray, values: np.ndarray, level: float) -> np.ndarray:
    """Times where ``values`` crosses ``level``, linearly interpolated."""
    d = np.asarray(values, dtype=float) - level
    above = d >= 0.0
    idx = np.nonzero(above[1:] != above[:-1])[0]
    t0, t1 = times[idx], times[idx + 1]
    d0, d1 = d[idx], d[idx + 1]
    return t0 + (t1 - t0) * (-d0) / (d1 - d0)


def propagation_delay(waveform: Waveform, input_node, output_node: str, vdd: float,
                      window: Optional[tuple] = None) -> float:
    """Mean 50%-crossing delay from input transitions to the output response.

    Each input crossing is paired with the first output crossing at or after
    it and before the next input crossing; input transitions that leave the
    output unchanged are skipped.  ``input_node`` may be a node name or a
    sequence of names whose crossings are merged.
    """
    nodes = [input_node] if isinstance(input_node, str) else list(input_node)
    level = 0.5 * vdd
    t = waveform.times
    ins = np.sort(np.concatenate([crossings(t, waveform.v(n), level) for n in nodes]))
    outs = crossings(t, waveform.v(output_node), level)
    limits = np.append(ins[1:], math.inf)
    if window is not None:
        keep = (ins >= window[0]) & (ins <= window[1])
        ins, limits = ins[keep], limits[keep]
    if ins.size == 0:
        raise MeasurementError(f"no 50% crossing on {', '.join(nodes)} in the measurement window")
    delays = []
    for tin, limit in zip(ins, limits):
        j = np.searchsorted(outs, tin, side="left")
        if j < len(outs) and outs[j] < limit:
            delays.append(outs[j] - tin)
    if not delays:
        raise MeasurementError(
            f"unmeasurable delay: no {output_node} crossing follows any input crossing")
    return float(max(0.0, np.mean(delays)))


def average_power(waveform: Waveform, window: Optional[tuple] = None) -> float:
    """Mean power delivered by all sources over ``window`` (trapezoidal rule)."""
    t = waveform.times
    t0, t1 = window if window is not None else (t[0], t[-1])
    if not t1 > t0:
        raise MeasurementError("empty measurement window")
    _span_check(waveform, (t0, t1))
    p = waveform.delivered_power()
    inside = (t > t0) & (t < t1)
    ts = np.concatenate([[t0], t[inside], [t1]])
    ps = np.concatenate([[np.interp(t0, t, p)], p[inside], [np.interp(t1, t, p)]])
    return float(_trapezoid(ps, ts) / (t1 - t0))


def pdp(power: float, delay: float) -> float:
    if not (math.isfinite(power) and math.isfinite(delay)) or power < 0 or delay < 0:
        raise ValueError("power and delay must be finite and non-negative")
    return power * delay


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Mismatch:
    cycle: int
    expected: int
    got: object
    voltage: float

    def __str__(self):
        return (f"cycle {self.cycle}: expected {self.expected}, got {self.got} "
                f"({self.voltage:.4f} V)")


@dataclass(frozen=True)
class Verdict:
    kind: CellKind
    expected: tuple
    observed: tuple
    voltages: tuple
    mismatches: tuple = ()

    @property
    def passed(self) -> bool:
        return not self.mismatches

    @property
    def detail(self) -> str:
        if self.passed:
            return "pass"
        return f"{len(self.mismatches)} mismatch(es); first at {self.mismatches[0]}"


def verify_circuit(kind: CellKind, waveform: Waveform, stimulus: StimulusPlan,
                   thresholds: ThresholdConfig, preamble: int = 1) -> Verdict:
    """Compare sampled output with the golden model, skipping ``preamble`` cycles.

    Gates have no state, so every cycle is checked for them.
    """
    kind = CellKind(kind)
    if stimulus.kind is not kind:
        raise ValueError(f"stimulus is for {stimulus.kind.value}, not {kind.value}")
    times = stimulus.sample_times()
    if waveform.times[-1] < times[-1] - 1e-9 * times[-1]:
        raise ValueError("waveform is shorter than the stimulus")
    node = output_node(kind)
    volts = sample(waveform, node, times)
    bits = to_logic(waveform, node, thresholds, times)
    golden = golden_sequence(kind, stimulus)
    first = 0 if kind in GATES else preamble
    bad = tuple(Mismatch(n, golden[n], bits[n], float(volts[n]))
                for n in range(first, stimulus.cycles) if bits[n] != golden[n])
    return Verdict(kind, tuple(golden[first:]), tuple(bits[first:]),
                   tuple(float(v) for v in volts[first:]), bad)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Reference:
    """Published figures for one design (``None`` where not reported)."""

    total_components: Optional[int] = None
    transistors: Optional[int] = None
    memristors: Optional[int] = None
    avg_power_uW: Optional[float] = None
    delay_ps: Optional[float] = None
    label: str = "this work"

    def as_dict(self, full: bool = False) -> dict:
        d = {"total_components": self.total_components, "avg_power_uW": self.avg_power_uW,
             "delay_ps": self.delay_ps}
        if full:
            d = {"label": self.label, "transistors": self.transistors,
                 "memristors": self.memristors, **d}
        return d


REFERENCES = {
    CellKind.SR_FF: Reference(24, 12, 12, 33.8, 239.5),
    CellKind.D_FF: Reference(18, 11, 7, 14.2, 209.5),
    CellKind.JK_FF: Reference(26, 12, 14, 14.2, 147.0),
    CellKind.T_FF: Reference(23, 12, 11, 40.74, 230.0),
    CellKind.D_LATCH: Reference(10, 6, 4, 7.1, 219.0),
}

# earlier designs the published cells were compared against
PRIOR_DESIGNS = {
    CellKind.D_LATCH: (
        Reference(8, 5, 3, 21.1, 2.0, "Ref. [9]"),
        Reference(8, 7, 1, 27.6, None, "Ref. [10]"),
        Reference(9, 7, 2, 29.45, None, "Ref. [11]"),
        Reference(14, 12, 2, 15.39, 1.09, "Ref. [12]"),
        Reference(8, 8, 0, 15.15, 10000.0, "Ref. [9] (CMOS only)"),
    ),
    CellKind.D_FF: (
        Reference(25, 12, 13, 41.96, 508.0, "Ref. [7]"),
        Reference(6, 1, 5, 19.67, None, "Ref. [8]"),
        Reference(14, 9, 5, 35.1, None, "Ref. [9]"),
        Reference(18, 10, 8, 23.4, 144.6, "Ref. [13]"),
    ),
    CellKind.JK_FF: (
        Reference(9, 2, 7, 54.59, None, "Ref. [8]"),
        Reference(34, 16, 18, 140.3, 206.8, "Ref. [13]"),
    ),
}


@dataclass(frozen=True)
class CellReport:
    kind: CellKind
    counts: ComponentCount
    avg_power: float  # W
    delay: float  # s
    verdict: Verdict
    pdp: float = field(default=float("nan"))  # J

    def __post_init__(self):
        object.__setattr__(self, "pdp", pdp(self.avg_power, self.delay))

    @property
    def verified(self) -> bool:
        return self.verdict.passed

    @property
    def reference(self) -> Optional[Reference]:
        return REFERENCES.get(self.kind)

    def as_dict(self) -> dict:
        ref = self.reference or Reference()
        return {
            "cell": self.kind.value,
            "transistors": self.counts.transistors,
            "memristors": self.counts.memristors,
            "total_components": self.counts.total,
            "avg_power_uW": self.avg_power * 1e6,
            "delay_ps": self.delay * 1e12,
            "pdp_fJ": self.pdp * 1e15,
            "verified": self.verified,
            "reference": ref.as_dict(),
        }


def _fmt(x, digits=2) -> str:
    return "-" if x is None else f"{x:.{digits}f}"


def build_report(reports: Sequence[CellReport], fmt: str = "json") -> str:
    """JSON document or markdown tables; rows keep the order given."""
    if not reports:
        raise ValueError("need at least one cell report")
    kinds = {r.kind for r in reports}
    prior = {k.value: [p.as_dict(full=True) for p in v] for k, v in PRIOR_DESIGNS.items() if k in kinds}
    if fmt == "json":
        doc = {"cells": [r.as_dict() for r in reports], "prior_designs": prior}
        return json.dumps(doc, indent=2) + "\n"
    if fmt != "markdown":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = [
        "| Cell | T | M | Total | Power (uW) | Delay (ps) | PDP (fJ) | Verified "
        "| Ref. total | Ref. power (uW) | Ref. delay (ps) |",
        "|---|---|---|---|---|---|---|---|---|---|---|",
    ]
    for r in reports:
        d = r.as_dict()
        ref = d["reference"]
        lines.append(
            f"| {d['cell']} | {d['transistors']} | {d['memristors']} | {d['total_components']} "
            f"| {d['avg_power_uW']:.3f} | {d['delay_ps']:.1f} | {d['pdp_fJ']:.3f} "
            f"| {'yes' if d['verified'] else 'NO'} | {ref['total_components'] or '-'} "
            f"| {_fmt(ref['avg_power_uW'])} | {_fmt(ref['delay_ps'], 1)} |")
    for cell, rows in prior.items():
        lines += ["", f"Prior designs compared with {cell}:", "",
                  "| Design | T | M | Total | Power (uW) | Delay (ps) |", "|---|---|---|---|---|---|"]
        for p in rows:
            lines.append(f"| {p['label']} | {p['transistors']} | {p['memristors']} "
                         f"| {p['total_components']} | {_fmt(p['avg_power_uW'])} "
                         f"| {_fmt(p['delay_ps'], 2)} |")
    return "\n".join(lines) + "\n"


def delay_inputs(kind: CellKind) -> tuple:
    """Input nodes whose transitions start a delay measurement."""
    kind = CellKind(kind)
    if kind in GATES:
        return INPUTS[kind]
    if kind is CellKind.D_LATCH:
        return ("clk", "d")
    return ("clk",)
