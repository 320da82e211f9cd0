"""Flatten a validated netlist into the array form consumed by the kernels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..devices import DC, PWL, Pulse, Sin
from ..netlist import GROUND, Capacitor, Memristor, Mosfet, Netlist, Resistor, VSource

# source kind codes shared with the kernels
SRC_DC, SRC_PULSE, SRC_PWL, SRC_SIN = 0, 1, 2, 3

# column layout of ``mem_par``
MEM_COLS = ("b1", "b2", "a1", "a2", "alpha1", "alpha2", "chi", "gamma", "k", "m", "p", "w_min", "w_max")


@dataclass
class Circuit:
    """Index/parameter arrays for one netlist.  Node index -1 is ground."""

    node_names: list
    source_names: list
    memristor_names: list
    n_nodes: int
    res_a: np.ndarray
    res_b: np.ndarray
    res_g: np.ndarray
    cap_a: np.ndarray
    cap_b: np.ndarray
    cap_c: np.ndarray
    mos_d: np.ndarray
    mos_g: np.ndarray
    mos_s: np.ndarray
    mos_par: np.ndarray  # beta, vth, lambda, polarity
    mem_p: np.ndarray
    mem_n: np.ndarray
    mem_par: np.ndarray
    mem_w0: np.ndarray
    src_p: np.ndarray
    src_n: np.ndarray
    src_kind: np.ndarray
    src_par: np.ndarray
    pwl_off: np.ndarray
    pwl_t: np.ndarray
    pwl_v: np.ndarray
    ic_a: np.ndarray
    ic_b: np.ndarray
    ic_v: np.ndarray

    @property
    def n_sources(self) -> int:
        return len(self.source_names)

    @property
    def size(self) -> int:
        """Unknowns in a transient step: node voltages plus source currents."""
        return self.n_nodes + self.n_sources

    @property
    def dc_size(self) -> int:
        return self.size + len(self.ic_v)


def _i32(values) -> np.ndarray:
    return np.ascontiguousarray(values, dtype=np.int32).reshape(-1)


def _f64(values, cols=None) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if cols is not None:
        arr = arr.reshape(-1, cols)
    return arr


def compile_netlist(netlist: Netlist) -> Circuit:
    index = netlist.node_index
    if index is None:
        raise ValueError("netlist must be validated before compilation")

    def ix(node: str) -> int:
        return index[node] - 1 if node != GROUND else -1

    res, caps, mos, mems, srcs = [], [], [], [], []
    ic_a, ic_b, ic_v = [], [], []
    for el in netlist.elements:
        if isinstance(el, Resistor):
            res.append((ix(el.n1), ix(el.n2), 1.0 / el.ohms))
        elif isinstance(el, Capacitor):
            caps.append((ix(el.n1), ix(el.n2), el.farads))
            if el.ic is not None:
                ic_a.append(ix(el.n1))
                ic_b.append(ix(el.n2))
                ic_v.append(el.ic)
        elif isinstance(el, Mosfet):
            p = netlist.mosfet_params(el)
            pol = 1.0 if el.polarity == "N" else -1.0
            mos.append((ix(el.drain), ix(el.gate), ix(el.source),
                        (p.kprime * p.w_over_l, p.vth, p.lambda_, pol)))
        elif isinstance(el, Memristor):
            p = netlist.memristor_params(el)
            par = (p.b1, p.b2, p.a1, p.a2, p.alpha1, p.alpha2, p.chi, p.gamma,
                   p.A_rate * p.time_scale, float(p.m), p.p, p.w_min, p.w_max)
            mems.append((el.name, ix(el.pos), ix(el.neg), par, el.w0))
        elif isinstance(el, VSource):
            srcs.append(el)
    for node, volts in netlist.ics.items():
        ic_a.append(ix(node))
        ic_b.append(-1)
        ic_v.append(volts)

    src_kind, src_par, pwl_off, pwl_t, pwl_v = [], [], [0], [], []
    for s in srcs:
        spec = s.spec
        row = [0.0] * 7
        if isinstance(spec, DC):
            kind, row[0] = SRC_DC, spec.level
        elif isinstance(spec, Pulse):
            kind = SRC_PULSE
            row = [spec.v_low, spec.v_high, spec.delay, spec.rise, spec.fall, spec.width, spec.period]
        elif isinstance(spec, Sin):
            kind = SRC_SIN
            row[:3] = [spec.offset, spec.amplitude, spec.frequency]
        elif isinstance(spec, PWL):
            kind = SRC_PWL
            pwl_t.extend(t for t, _ in spec.points)
            pwl_v.extend(v for _, v in spec.points)
        else:  # pragma: no cover
            raise TypeError(f"unsupported source spec {spec!r}")
        src_kind.append(kind)
        src_par.append(row)
        pwl_off.append(len(pwl_t))

    return Circuit(
        node_names=[n for n in netlist.nodes if n != GROUND],
        source_names=[s.name for s in srcs],
        memristor_names=[m[0] for m in mems],
        n_nodes=len(netlist.nodes) - 1,
        res_a=_i32([r[0] for r in res]), res_b=_i32([r[1] for r in res]),
        res_g=_f64([r[2] for r in res]),
        cap_a=_i32([c[0] for c in caps]), cap_b=_i32([c[1] for c in caps]),
        cap_c=_f64([c[2] for c in caps]),
        mos_d=_i32([m[0] for m in mos]), mos_g=_i32([m[1] for m in mos]),
        mos_s=_i32([m[2] for m in mos]), mos_par=_f64([m[3] for m in mos], 4),
        mem_p=_i32([m[1] for m in mems]), mem_n=_i32([m[2] for m in mems]),
        mem_par=_f64([m[3] for m in mems], len(MEM_COLS)),
        mem_w0=_f64([m[4] for m in mems]),
        src_p=_i32([ix(s.pos) for s in srcs]), src_n=_i32([ix(s.neg) for s in srcs]),
        src_kind=_i32(src_kind), src_par=_f64(src_par, 7),
        pwl_off=_i32(pwl_off), pwl_t=_f64(pwl_t), pwl_v=_f64(pwl_v),
        ic_a=_i32(ic_a), ic_b=_i32(ic_b), ic_v=_f64(ic_v),
    )
