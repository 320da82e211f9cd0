"""Gate and flip-flop netlist generators, stimulus plans and golden models.

Topologies
----------
* Hybrid inverter: memristor from VDD (n+) to the output, NMOS pull-down.
* OR: two memristors, n+ on the inputs, n- on the shared output.
* AND: the same pair reversed (n+ on the output).
* NAND / NOR: AND / OR pair driving a hybrid inverter.
* XOR: OR pair on the output, AND pair driving an NMOS that shorts the
  output to ground when both inputs are high.
* D latch: clock inverter, input transmission gate, forward and output
  hybrid inverters, and a feedback path Q -> memristor -> NMOS pass -> X.
* D flip-flop: low-transparent master and high-transparent slave sharing
  the clock inverter.  T, SR and JK add memristor logic in front of D.

Every non-rail node carries a small grounded capacitor standing in for
wiring and gate capacitance; capacitors are not counted as components.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field, replace
from typing import Optional

from .devices import DC, PWL, MemristorParams, MosfetParams, Pulse, validate_params
from .netlist import (
    Capacitor,
    Memristor,
    Mosfet,
    Netlist,
    Tran,
    VSource,
    validate,
)


class CellKind(enum.Enum):
    NOT = "not"
    AND = "and"
    OR = "or"
    NAND = "nand"
    NOR = "nor"
    XOR = "xor"
    D_LATCH = "d_latch"
    D_FF = "d_ff"
    T_FF = "t_ff"
    SR_FF = "sr_ff"
    JK_FF = "jk_ff"

    @classmethod
    def parse(cls, name: str) -> "CellKind":
        try:
            return cls(name.lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown cell {name!r}; valid cells: {valid}") from None

    @property
    def sequential(self) -> bool:
        return self in SEQUENTIAL


GATES = (CellKind.NOT, CellKind.AND, CellKind.OR, CellKind.NAND, CellKind.NOR, CellKind.XOR)
SEQUENTIAL = (CellKind.D_LATCH, CellKind.D_FF, CellKind.T_FF, CellKind.SR_FF, CellKind.JK_FF)
FLIPFLOPS = (CellKind.D_FF, CellKind.T_FF, CellKind.SR_FF, CellKind.JK_FF)

INPUTS = {
    CellKind.NOT: ("a",),
    CellKind.AND: ("a", "b"),
    CellKind.OR: ("a", "b"),
    CellKind.NAND: ("a", "b"),
    CellKind.NOR: ("a", "b"),
    CellKind.XOR: ("a", "b"),
    CellKind.D_LATCH: ("d",),
    CellKind.D_FF: ("d",),
    CellKind.T_FF: ("t",),
    CellKind.SR_FF: ("s", "r"),
    CellKind.JK_FF: ("j", "k"),
}

# inputs that leave the stored state untouched
_NEUTRAL = {
    CellKind.T_FF: {"t": 0},
    CellKind.SR_FF: {"s": 0, "r": 0},
    CellKind.JK_FF: {"j": 0, "k": 0},
}


def output_node(kind: CellKind) -> str:
    return "q" if kind.sequential else "out"


@dataclass(frozen=True)
class CellConfig:
    """Electrical and timing defaults shared by every generated cell."""

    vdd: float = 1.2
    clock_period: float = 10e-9
    edge_time: float = 0.1e-9
    w0: float = 0.5
    time_scale: float = 1e14
    w_min: float = 1e-4
    w_max: float = 0.9
    dt: float = 10e-12
    node_cap: float = 5e-15
    load_cap: float = 20e-15
    nmos_model: str = "nfet"
    pmos_model: str = "pfet"
    memristor_model: str = "ymcell"
    logic_memristor_model: str = "ymlogic"
    logic_current_scales: tuple = (0.1, 0.03)
    nmos: MosfetParams = MosfetParams("N", 0.25, 300e-6, 0.1, 10.0)
    pmos: MosfetParams = MosfetParams("P", 0.25, 120e-6, 0.1, 10.0)
    inverter_wl: float = 40.0
    xor_pulldown_wl: float = 4.0
    pass_wl: float = 10.0
    tg_n_wl: float = 10.0
    tg_p_wl: float = 25.0

    def __post_init__(self):
        if not self.edge_time < 0.05 * self.clock_period:
            raise ValueError("edge time must be below 5% of the clock period")
        if not self.vdd > max(self.nmos.vth, self.pmos.vth):
            raise ValueError("vdd must exceed the MOSFET thresholds")
        if not (0.0 < self.w0 < 1.0):
            raise ValueError("w0 must lie strictly inside (0, 1)")
        if not 0 < self.dt < self.edge_time:
            raise ValueError("dt must be positive and shorter than the edge time")
        if not all(0 < k <= 1 for k in self.logic_current_scales):
            raise ValueError("logic current scales must lie in (0, 1]")
        validate_params(self.memristor_params)

    @property
    def memristor_params(self) -> MemristorParams:
        return MemristorParams(time_scale=self.time_scale, w_min=self.w_min, w_max=self.w_max)

    def logic_model_name(self, level: int) -> str:
        return self.logic_memristor_model if level == 1 else f"{self.logic_memristor_model}{level}"

    def logic_memristor_params(self, level: int = 1) -> MemristorParams:
        """Smaller-area device for AND/OR networks: same dynamics, current scaled
        by the entry of ``logic_current_scales`` for the network level."""
        base = self.memristor_params
        k = self.logic_current_scales[level - 1]
        return base.with_(b1=base.b1 * k, b2=base.b2 * k, chi=base.chi * k)


class _Builder:
    """Accumulates elements with auto-numbered names."""

    def __init__(self, title: str, config: CellConfig):
        self.title = title
        self.cfg = config
        self.elements: list = []
        self.counts: dict = {}
        self.nodes: set = set()
        self.inputs: list = []
        self.models: dict = {}

    def _name(self, prefix: str) -> str:
        n = self.counts.get(prefix, 0) + 1
        self.counts[prefix] = n
        return f"{prefix}{n}"

    def _touch(self, *nodes):
        self.uses_vdd = getattr(self, "uses_vdd", False) or "vdd" in nodes
        self.nodes.update(n for n in nodes if n not in ("0", "vdd"))

    def source(self, name: str, node: str, spec=None):
        self.elements.append(VSource(name, node, "0", spec or DC(0.0)))
        if node != "vdd":
            self.inputs.append(node)
            self._touch(node)

    def memristor(self, pos: str, neg: str, level: int = 0):
        """``level`` 0 is a full-size device; n >= 1 marks an n-th level logic network."""
        self._touch(pos, neg)
        if level:
            model = self.cfg.logic_model_name(level)
            self.models[model] = self.cfg.logic_memristor_params(level)
        else:
            model = self.cfg.memristor_model
        self.elements.append(Memristor(self._name("YM"), pos, neg, self.cfg.w0, model))

    def nmos(self, d: str, g: str, s: str, wl: float):
        self._touch(d, g, s)
        self.elements.append(Mosfet(self._name("MN"), d, g, s, "0", "N", self.cfg.nmos_model, wl))

    def pmos(self, d: str, g: str, s: str, wl: float):
        self._touch(d, g, s, "vdd")
        self.elements.append(Mosfet(self._name("MP"), d, g, s, "vdd", "P", self.cfg.pmos_model, wl))

    # composite stages -------------------------------------------------

    def inverter(self, inp: str, out: str):
        self.memristor("vdd", out)
        self.nmos(out, inp, "0", self.cfg.inverter_wl)

    def or_pair(self, a: str, b: str, out: str, level: int = 1):
        self.memristor(a, out, level)
        self.memristor(b, out, level)

    def and_pair(self, a: str, b: str, out: str, level: int = 1):
        self.memristor(out, a, level)
        self.memristor(out, b, level)

    def transmission_gate(self, a: str, b: str, n_gate: str, p_gate: str):
        self.nmos(b, n_gate, a, self.cfg.tg_n_wl)
        self.pmos(b, p_gate, a, self.cfg.tg_p_wl)

    def latch(self, prefix: str, d: str, clk: str, clkb: str, transparent_high: bool, q: str,
              qb: Optional[str] = None):
        """Latch body (5T+3M) using an existing clock pair."""
        x, y = f"{prefix}x", f"{prefix}y"
        qb = qb or f"{prefix}qb"
        on, off = (clk, clkb) if transparent_high else (clkb, clk)
        self.transmission_gate(d, x, on, off)
        self.inverter(x, qb)
        self.inverter(qb, q)
        self.memristor(q, y)
        self.nmos(x, off, y, self.cfg.pass_wl)

    def netlist(self) -> Netlist:
        cfg = self.cfg
        els = list(self.elements)
        if getattr(self, "uses_vdd", False):
            els.insert(0, VSource("VDD", "vdd", "0", DC(cfg.vdd)))
        for node in sorted(self.nodes):
            if node in self.inputs:
                continue
            cap = cfg.load_cap if node in ("out", "q") else cfg.node_cap
            els.append(Capacitor(f"C_{node}", node, "0", cap))
        models = {
            cfg.nmos_model: cfg.nmos,
            cfg.pmos_model: cfg.pmos,
            cfg.memristor_model: cfg.memristor_params,
        }
        models.update(self.models)
        return validate(Netlist(title=self.title, elements=tuple(els), models=models))


def build_gate(kind: CellKind, config: CellConfig = CellConfig()) -> Netlist:
    """Combinational cell with DC-0 input placeholders and output ``out``."""
    kind = CellKind(kind)
    if kind not in GATES:
        raise ValueError(f"{kind.value} is not a gate")
    b = _Builder(kind.value, config)
    for name in INPUTS[kind]:
        b.source(f"V{name.upper()}", name)
    if kind is CellKind.NOT:
        b.inverter("a", "out")
    elif kind is CellKind.OR:
        b.or_pair("a", "b", "out")
    elif kind is CellKind.AND:
        b.and_pair("a", "b", "out")
    elif kind is CellKind.NAND:
        b.and_pair("a", "b", "n1")
        b.inverter("n1", "out")
    elif kind is CellKind.NOR:
        b.or_pair("a", "b", "n1")
        b.inverter("n1", "out")
    else:
        b.or_pair("a", "b", "out")
        b.and_pair("a", "b", "n1")
        b.nmos("out", "n1", "0", config.xor_pulldown_wl)
    return b.netlist()


def build_d_latch(config: CellConfig = CellConfig(), transparent_phase: str = "high") -> Netlist:
    """Level-sensitive D latch: 6 transistors, 4 memristors."""
    if transparent_phase not in ("high", "low"):
        raise ValueError("transparent_phase must be 'high' or 'low'")
    b = _Builder(CellKind.D_LATCH.value, config)
    b.source("VCLK", "clk")
    b.source("VD", "d")
    b.inverter("clk", "clkb")
    b.latch("", "d", "clk", "clkb", transparent_phase == "high", "q", "qb")
    return b.netlist()


def build_flipflop(kind: CellKind, config: CellConfig = CellConfig()) -> Netlist:
    """Positive-edge master/slave flip-flop with optional D-input logic."""
    kind = CellKind(kind)
    if kind not in FLIPFLOPS:
        raise ValueError(f"{kind.value} is not a flip-flop")
    b = _Builder(kind.value, config)
    b.source("VCLK", "clk")
    for name in INPUTS[kind]:
        b.source(f"V{name.upper()}", name)
    d = "d"
    if kind is CellKind.T_FF:
        d = "dn"
        b.or_pair("t", "q", d)
        b.and_pair("t", "q", "tq")
        b.nmos(d, "tq", "0", config.xor_pulldown_wl)
    elif kind is CellKind.SR_FF:
        d = "dn"
        b.inverter("r", "rb")
        b.and_pair("rb", "q", "rbq")
        b.or_pair("s", "rbq", d, level=2)
    elif kind is CellKind.JK_FF:
        d = "dn"
        b.inverter("k", "kb")
        b.and_pair("j", "qb", "jqb")
        b.and_pair("kb", "q", "kbq")
        b.or_pair("jqb", "kbq", d, level=2)
    b.inverter("clk", "clkb")
    b.latch("m_", d, "clk", "clkb", False, "m_q")
    b.latch("s_", "m_q", "clk", "clkb", True, "q", "qb")
    return b.netlist()


def build_cell(kind: CellKind, config: CellConfig = CellConfig()) -> Netlist:
    kind = CellKind(kind)
    if kind in GATES:
        return build_gate(kind, config)
    if kind is CellKind.D_LATCH:
        return build_d_latch(config)
    return build_flipflop(kind, config)


# ---------------------------------------------------------------------------
# Stimulus and golden models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StimulusPlan:
    """Per-input bits, one per clock cycle, plus clock and sampling timing.

    The clock is high for the first half of every cycle, so rising edges sit
    on cycle boundaries.  Inputs switch ``data_offset`` into each cycle.  Gate
    and latch outputs are sampled in the same cycle; a flip-flop captures the
    cycle-n inputs at the edge that opens cycle n + 1 and is sampled there.
    Samples fall ``sample_fraction`` of the way through the sampled window
    (the whole cycle for gates, the high phase otherwise).
    """

    kind: CellKind
    bits: dict
    clock_period: float = 10e-9
    edge_time: float = 0.1e-9
    sample_fraction: float = 0.9
    data_offset: float = 0.1
    q0: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", CellKind(self.kind))
        lengths = {len(v) for v in self.bits.values()}
        if len(lengths) != 1 or 0 in lengths:
            raise ValueError("all input sequences must have the same length >= 1")
        if set(self.bits) != set(INPUTS[self.kind]):
            raise ValueError(f"{self.kind.value} needs inputs {INPUTS[self.kind]}")
        if not 0.0 < self.sample_fraction < 1.0:
            raise ValueError("sample_fraction must lie in (0, 1)")
        object.__setattr__(self, "bits", {k: tuple(int(b) for b in v) for k, v in self.bits.items()})

    @property
    def cycles(self) -> int:
        return len(next(iter(self.bits.values())))

    @property
    def clocked(self) -> bool:
        return self.kind.sequential

    @property
    def duration(self) -> float:
        """Simulated time needed to reach the last sample."""
        extra = 0.5 if self.kind in FLIPFLOPS else 0.0
        return (self.cycles + extra) * self.clock_period

    def row(self, n: int) -> dict:
        return {k: v[n] for k, v in self.bits.items()}

    def input_times(self) -> list:
        """Start of each cycle's input transition."""
        return [(n + self.data_offset) * self.clock_period for n in range(self.cycles)]

    def sample_times(self) -> list:
        P = self.clock_period
        if self.kind in FLIPFLOPS:
            return [(n + 1) * P + self.sample_fraction * 0.5 * P for n in range(self.cycles)]
        if self.kind is CellKind.D_LATCH:
            return [n * P + self.sample_fraction * 0.5 * P for n in range(self.cycles)]
        return [n * P + self.sample_fraction * P for n in range(self.cycles)]

    def rising_edges(self) -> list:
        """Rising clock edges that update the output (one per cycle)."""
        P = self.clock_period
        if self.kind in FLIPFLOPS:
            return [(n + 1) * P for n in range(self.cycles)]
        return [n * P for n in range(self.cycles)]


def _next_state(kind: CellKind, row: dict, q: int) -> int:
    if kind in (CellKind.D_FF, CellKind.D_LATCH):
        return row["d"]
    if kind is CellKind.T_FF:
        return row["t"] ^ q
    if kind is CellKind.SR_FF:
        return row["s"] | ((1 - row["r"]) & q)
    return (row["j"] & (1 - q)) | ((1 - row["k"]) & q)


def _gate(kind: CellKind, row: dict) -> int:
    a = row["a"]
    if kind is CellKind.NOT:
        return 1 - a
    b = row["b"]
    return {
        CellKind.AND: a & b, CellKind.OR: a | b, CellKind.NAND: 1 - (a & b),
        CellKind.NOR: 1 - (a | b), CellKind.XOR: a ^ b,
    }[kind]


def golden_sequence(kind: CellKind, stimulus: StimulusPlan, q0: Optional[int] = None) -> list:
    """Expected sampled output per cycle from the characteristic equations."""
    kind = CellKind(kind)
    if kind is CellKind.SR_FF:
        for n in range(stimulus.cycles):
            if stimulus.bits["s"][n] and stimulus.bits["r"][n]:
                raise ValueError(f"cycle {n}: S=R=1 is not a legal SR input")
    if kind in GATES:
        return [_gate(kind, stimulus.row(n)) for n in range(stimulus.cycles)]
    q = stimulus.q0 if q0 is None else q0
    out = []
    for n in range(stimulus.cycles):
        q = _next_state(kind, stimulus.row(n), q)
        out.append(q)
    return out


def _legal_rows(kind: CellKind) -> list:
    names = INPUTS[kind]
    rows = []
    for code in range(1 << len(names)):
        row = {n: (code >> (len(names) - 1 - i)) & 1 for i, n in enumerate(names)}
        if kind is CellKind.SR_FF and row["s"] and row["r"]:
            continue
        rows.append(row)
    return rows


def default_stimulus(kind: CellKind, cycles: int = 16, seed: int = 0,
                     config: CellConfig = CellConfig()) -> StimulusPlan:
    """Seeded random plan; cycle 0 is a preamble that preserves ``q0``.

    With 16 or more cycles every legal input combination occurs after the
    preamble.
    """
    kind = CellKind(kind)
    if cycles < 4:
        raise ValueError("cycles must be >= 4")
    rng = random.Random(seed)
    legal = _legal_rows(kind)
    q0 = rng.randint(0, 1) if kind.sequential else 0
    rows = [dict(rng.choice(legal)) for _ in range(cycles)]
    if kind in _NEUTRAL:
        rows[0] = dict(_NEUTRAL[kind])
    elif kind in (CellKind.D_FF, CellKind.D_LATCH):
        rows[0] = {"d": q0}
    if cycles >= 16:
        while True:
            missing = [r for r in legal if r not in rows[1:]]
            if not missing:
                break
            counts = {tuple(r.items()): rows[1:].count(r) for r in legal}
            spare = [n for n in range(1, cycles) if counts[tuple(rows[n].items())] > 1]
            rows[rng.choice(spare)] = dict(missing[0])
    bits = {name: tuple(r[name] for r in rows) for name in INPUTS[kind]}
    return StimulusPlan(kind, bits, config.clock_period, config.edge_time, q0=q0)


# ---------------------------------------------------------------------------
# Testbench assembly
# ---------------------------------------------------------------------------


def _bit_waveform(bits, plan: StimulusPlan, vdd: float) -> PWL:
    P, edge = plan.clock_period, plan.edge_time
    start = plan.data_offset * P
    pts = [(0.0, bits[0] * vdd)]
    for n in range(1, len(bits)):
        if bits[n] != bits[n - 1]:
            t0 = n * P + start
            pts.append((t0, bits[n - 1] * vdd))
            pts.append((t0 + edge, bits[n] * vdd))
    if len(pts) == 1:
        pts.append((len(bits) * P, bits[0] * vdd))
    return PWL(tuple(pts))


def clock_source(plan: StimulusPlan, vdd: float) -> Pulse:
    P, e = plan.clock_period, plan.edge_time
    return Pulse(0.0, vdd, 0.0, e, e, 0.5 * P - e, P)


def _state_ics(kind: CellKind, q0: int, vdd: float) -> dict:
    hi, lo = q0 * vdd, (1 - q0) * vdd
    if kind is CellKind.D_LATCH:
        return {"x": hi, "qb": lo, "q": hi}
    return {"m_x": hi, "m_qb": lo, "m_q": hi, "s_x": hi, "qb": lo, "q": hi}


def testbench(kind: CellKind, plan: StimulusPlan, config: CellConfig = CellConfig(),
              netlist: Optional[Netlist] = None) -> Netlist:
    """Cell netlist with stimulus sources, initial state and ``.TRAN`` attached."""
    kind = CellKind(kind)
    nl = netlist if netlist is not None else build_cell(kind, config)
    vdd = config.vdd
    els = []
    for el in nl.elements:
        if isinstance(el, VSource) and el.pos == "clk":
            el = replace(el, spec=clock_source(plan, vdd))
        elif isinstance(el, VSource) and el.pos in plan.bits:
            el = replace(el, spec=_bit_waveform(plan.bits[el.pos], plan, vdd))
        els.append(el)
    ics = _state_ics(kind, plan.q0, vdd) if kind.sequential else {}
    tran = Tran(config.dt, plan.duration)
    return validate(replace(nl, elements=tuple(els), ics=ics, tran=tran, node_index=None),
                    require_analysis=True)
