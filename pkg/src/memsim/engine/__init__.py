"""Modified nodal analysis: DC operating point and fixed-step transient.

The numeric kernel comes from the compiled ``_ckernel`` extension when it is
importable and from :mod:`._pykernel` otherwise.  Set ``MEMSIM_BACKEND=python``
to force the fallback.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..netlist import Netlist, VSource, validate
from . import _pykernel
from .compile import Circuit, compile_netlist
from .waveform import Waveform

log = logging.getLogger(__name__)


def _load_backend(name: Optional[str] = None):
    name = (name or os.environ.get("MEMSIM_BACKEND", "auto")).lower()
    if name == "python":
        return _pykernel
    try:
        from . import _ckernel
    except ImportError:
        if name in ("c", "compiled", "cython"):
            raise
        return _pykernel
    return _ckernel


kernel = _load_backend()
BACKEND = kernel.NAME


def available_backends() -> dict:
    out = {"python": _pykernel}
    try:
        from . import _ckernel

        out["cython"] = _ckernel
    except ImportError:
        pass
    return out


class SolverError(RuntimeError):
    """Newton iteration failed; ``time`` is None for the DC operating point."""

    def __init__(self, message: str, time: Optional[float] = None, node: Optional[str] = None):
        super().__init__(message)
        self.time = time
        self.node = node


@dataclass(frozen=True)
class SolverConfig:
    voltage_tolerance: float = 1e-6
    current_tolerance: float = 1e-9
    max_newton_iterations: int = 100
    gmin: float = 1e-12
    dt: Optional[float] = None
    t_stop: Optional[float] = None
    max_halvings: int = 8

    def __post_init__(self):
        for name in ("voltage_tolerance", "current_tolerance", "gmin"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.max_newton_iterations < 1:
            raise ValueError("max_newton_iterations must be >= 1")
        if self.dt is not None and self.t_stop is not None and not (0 < self.dt < self.t_stop):
            raise ValueError("need 0 < dt < t_stop")


@dataclass(frozen=True)
class OperatingPoint:
    circuit: Circuit
    x: np.ndarray

    def v(self, node: str) -> float:
        if node == "0":
            return 0.0
        return float(self.x[self.circuit.node_names.index(node)])

    def i(self, source: str) -> float:
        return float(self.x[self.circuit.n_nodes + self.circuit.source_names.index(source)])

    @property
    def voltages(self) -> dict:
        return {n: float(v) for n, v in zip(self.circuit.node_names, self.x)}

    @property
    def currents(self) -> dict:
        nn = self.circuit.n_nodes
        return {s: float(self.x[nn + j]) for j, s in enumerate(self.circuit.source_names)}


def _prepared(netlist: Netlist) -> Netlist:
    return netlist if netlist.node_index is not None else validate(netlist)


def _node_name(c: Circuit, idx: int) -> str:
    if 0 <= idx < c.n_nodes:
        return c.node_names[idx]
    if idx >= c.n_nodes:
        j = idx - c.n_nodes
        if j < c.n_sources:
            return f"i({c.source_names[j]})"
        return f"ic#{j - c.n_sources}"
    return "?"


def _dc_solve(c: Circuit, w: np.ndarray, config: SolverConfig, t: float = 0.0, be=None) -> np.ndarray:
    be = be or kernel
    tol = (config.voltage_tolerance, config.current_tolerance, config.max_newton_iterations)
    x = np.zeros(c.dc_size)
    status, _, worst, _ = be.newton(c, x, w, x, 1.0, t, True, config.gmin, *tol)
    if status == _pykernel.OK:
        return x
    # gmin stepping: start large, relax by decades, warm-start each stage
    log.info("DC operating point: plain Newton failed, stepping gmin")
    x = np.zeros(c.dc_size)
    g = max(config.gmin * 1e3, 1e-3)
    while True:
        status, _, worst, _ = be.newton(c, x, w, x, 1.0, t, True, g, *tol)
        if status != _pykernel.OK:
            break
        if g <= config.gmin:
            return x
        g = max(g / 10.0, config.gmin)
    what = "singular system at unknown" if status == _pykernel.SINGULAR else "worst residual at node"
    name = _node_name(c, worst)
    raise SolverError(f"DC operating point (t=0) did not converge ({what} {name})", None, name)


def dc_operating_point(netlist: Netlist, config: SolverConfig = SolverConfig()) -> OperatingPoint:
    """Solve with capacitors open and memristor states frozen at ``w0``."""
    nl = _prepared(netlist)
    c = compile_netlist(nl)
    x = _dc_solve(c, c.mem_w0.copy(), config)
    return OperatingPoint(c, x[: c.size].copy())


def assemble_system(netlist: Netlist, x, states=None, dt: Optional[float] = None, t: float = 0.0,
                    x_prev=None, gmin: float = 1e-12):
    """Jacobian and residual at candidate unknowns ``x``.

    ``dt=None`` assembles the DC system (capacitors open, no IC rows); otherwise
    capacitors use backward-Euler companions against ``x_prev``.
    Returns ``(J, f)`` with ``f`` the currents leaving each node followed by the
    source branch equations.
    """
    nl = _prepared(netlist)
    c = compile_netlist(nl)
    n = c.size
    x = np.asarray(x, dtype=float)
    w = c.mem_w0.copy() if states is None else np.asarray(states, dtype=float)
    J = np.zeros((n, n))
    f = np.zeros(n)
    xp = np.zeros(n) if x_prev is None else np.asarray(x_prev, dtype=float)
    if dt is None:
        # DC assembly without the IC constraint rows
        saved = c.ic_v
        c.ic_v = np.zeros(0)
        _pykernel.assemble(c, x, w, xp, 1.0, t, True, gmin, J, f)
        c.ic_v = saved
    else:
        _pykernel.assemble(c, x, w, xp, dt, t, False, gmin, J, f)
    return J, f


def run_transient(netlist: Netlist, config: Optional[SolverConfig] = None, backend=None) -> Waveform:
    """Fixed-step transient analysis from the ``.IC``-constrained operating point."""
    nl = _prepared(netlist)
    config = config or SolverConfig()
    dt = config.dt if config.dt is not None else (nl.tran.tstep if nl.tran else None)
    t_stop = config.t_stop if config.t_stop is not None else (nl.tran.tstop if nl.tran else None)
    if dt is None or t_stop is None:
        raise ValueError("transient analysis needs a .TRAN directive or dt/t_stop in the config")
    if not 0 < dt < t_stop:
        raise ValueError("need 0 < dt < t_stop")
    be = backend or kernel
    c = compile_netlist(nl)
    w0 = c.mem_w0.copy()
    x0 = _dc_solve(c, w0, config, 0.0, be)
    nsteps = int(round(t_stop / dt))
    X, W, status, fail_step, worst, clamps = be.transient(
        c, x0, w0, dt, nsteps, config.gmin, config.voltage_tolerance,
        config.current_tolerance, config.max_newton_iterations, config.max_halvings,
    )
    if clamps:
        log.warning("%d exponent evaluations clamped at the overflow guard", clamps)
    if status != _pykernel.OK:
        t = fail_step * dt
        name = _node_name(c, worst)
        raise SolverError(
            f"transient step failed at t={t:.6e} s after {config.max_halvings} halvings "
            f"(worst node {name})", t, name)
    nn = c.n_nodes
    times = np.arange(nsteps + 1) * dt
    terminals = tuple((el.pos, el.neg) for el in nl.of_type(VSource))
    return Waveform(times, tuple(c.node_names), tuple(c.source_names), tuple(c.memristor_names),
                    np.ascontiguousarray(X[:, :nn]), np.ascontiguousarray(X[:, nn:]),
                    np.ascontiguousarray(W), terminals)


__all__ = [
    "BACKEND", "OperatingPoint", "SolverConfig", "SolverError", "Waveform", "assemble_system",
    "available_backends", "dc_operating_point", "kernel", "run_transient",
]
