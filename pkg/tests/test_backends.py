"""The compiled kernel and the pure-Python fallback must agree."""

import numpy as np
import pytest

from memsim.cells import CellKind, default_stimulus, testbench as make_testbench
from memsim.devices import MemristorParams, advance_state
from memsim.engine import BACKEND, available_backends, run_transient
from memsim.engine import _pykernel as py
from memsim.engine.compile import compile_netlist

ck = available_backends().get("cython")
needs_compiled = pytest.mark.skipif(ck is None, reason="compiled kernel not built")


def test_python_backend_always_available():
    assert available_backends()["python"] is py
    assert BACKEND in available_backends()


def _par(p: MemristorParams):
    return np.array([p.b1, p.b2, p.a1, p.a2, p.alpha1, p.alpha2, p.chi, p.gamma,
                     p.A_rate * p.time_scale, p.m, p.p, p.w_min, p.w_max])


@needs_compiled
@pytest.mark.parametrize("w", [0.0, 0.05, 0.5, 0.95, 1.0])
@pytest.mark.parametrize("v", [-1.5, -0.3, 0.0, 0.4, 1.2])
def test_memristor_iv_agrees(w, v):
    par = _par(MemristorParams())
    a, b = py.memristor_iv(par, w, v), ck.memristor_iv(par, w, v)
    assert a == pytest.approx(b, rel=1e-13, abs=1e-300)


@needs_compiled
def test_advance_state_agrees():
    rng = np.random.default_rng(0)
    for bounds in ((0.0, 1.0), (1e-4, 0.9)):
        p = MemristorParams(time_scale=1e14, w_min=bounds[0], w_max=bounds[1])
        par = _par(p)
        for _ in range(300):
            w = rng.uniform(*bounds)
            v = rng.uniform(-1.5, 1.5)
            dt = 10 ** rng.uniform(-13, -9)
            a, b = py.advance_state(w, v, dt, par), ck.advance_state(w, v, dt, par)
            assert a == pytest.approx(b, rel=1e-12, abs=1e-15)
            assert a == pytest.approx(advance_state(w, v, dt, p), rel=1e-12, abs=1e-15)


@needs_compiled
def test_assembly_agrees():
    tb = make_testbench(CellKind.JK_FF, default_stimulus(CellKind.JK_FF, 4, 0))
    c = compile_netlist(tb)
    rng = np.random.default_rng(1)
    n = c.size
    for _ in range(5):
        x = rng.uniform(0, 1.2, n)
        xp = rng.uniform(0, 1.2, n)
        w = rng.uniform(0.01, 0.9, len(c.mem_w0))
        t = rng.uniform(0, 4e-8)
        Ja, fa = np.zeros((n, n)), np.zeros(n)
        Jb, fb = np.zeros((n, n)), np.zeros(n)
        py.assemble(c, x, w, xp, 1e-11, t, False, 1e-12, Ja, fa)
        ck.assemble(c, x, w, xp, 1e-11, t, False, 1e-12, Jb, fb)
        assert np.allclose(Ja, Jb, rtol=1e-12, atol=1e-18)
        assert np.allclose(fa, fb, rtol=1e-12, atol=1e-18)


@needs_compiled
@pytest.mark.parametrize("kind", [CellKind.XOR, CellKind.D_LATCH, CellKind.SR_FF], ids=lambda k: k.value)
def test_transient_agrees(kind):
    tb = make_testbench(kind, default_stimulus(kind, 4, 3))
    a = run_transient(tb, backend=py)
    b = run_transient(tb, backend=ck)
    assert np.max(np.abs(a.voltages - b.voltages)) < 1e-9
    assert np.max(np.abs(a.states - b.states)) < 1e-9
    assert np.max(np.abs(a.currents - b.currents)) < 1e-12
