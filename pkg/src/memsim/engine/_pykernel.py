"""Pure-Python solver kernel.

Reference implementation of the nodal-analysis kernel.  ``_ckernel.pyx``
implements the same functions with the same signatures and is preferred
when it has been compiled.
"""

from __future__ import annotations

import math

import numpy as np

from ..devices import EXP_LIMIT, _advance, mosfet_eval
from .compile import SRC_DC, SRC_PULSE, SRC_PWL, SRC_SIN

NAME = "python"

OK, NO_CONVERGENCE, SINGULAR = 0, 1, 2

#: Newton steps larger than this (volts, on any node) are scaled down.
MAX_NEWTON_STEP = 1.0


def advance_state(w, v, dt, par):
    return _advance(w, v, dt, par[8], int(par[9]), par[10], par[11], par[12])


def memristor_iv(par, w, v):
    """Current, conductance and number of clamped exponents."""
    clamps = 0
    xd = par[7] * v
    if xd > EXP_LIMIT:
        xd, clamps = EXP_LIMIT, clamps + 1
    ed = math.exp(xd)
    if v >= 0.0:
        b, a, al = par[0], par[2], par[4]
    else:
        b, a, al = par[1], par[3], par[5]
    x = al * v
    if x > EXP_LIMIT:
        x, clamps = EXP_LIMIT, clamps + 1
    e = math.exp(x)
    wa = b * w**a
    return wa * (e - 1.0) + par[6] * (ed - 1.0), wa * al * e + par[6] * par[7] * ed, clamps


def source_value(c, j, t):
    kind = c.src_kind[j]
    par = c.src_par[j]
    if kind == SRC_DC:
        return par[0]
    if kind == SRC_PULSE:
        v1, v2, td, tr, tf, pw, per = par
        if t < td:
            return v1
        tau = math.fmod(t - td, per)
        if tau < tr:
            return v1 + (v2 - v1) * tau / tr
        tau -= tr
        if tau < pw:
            return v2
        tau -= pw
        if tau < tf:
            return v2 - (v2 - v1) * tau / tf
        return v1
    if kind == SRC_SIN:
        return par[0] + par[1] * math.sin(2.0 * math.pi * par[2] * t)
    if kind == SRC_PWL:
        lo, hi = c.pwl_off[j], c.pwl_off[j + 1]
        ts, vs = c.pwl_t, c.pwl_v
        if t <= ts[lo]:
            return vs[lo]
        if t >= ts[hi - 1]:
            return vs[hi - 1]
        k = lo + int(np.searchsorted(ts[lo:hi], t, side="right"))
        return vs[k - 1] + (vs[k] - vs[k - 1]) * (t - ts[k - 1]) / (ts[k] - ts[k - 1])
    raise ValueError(f"unknown source kind {kind}")


def _stamp_g(J, a, b, g):
    if a >= 0:
        J[a, a] += g
        if b >= 0:
            J[a, b] -= g
            J[b, a] -= g
    if b >= 0:
        J[b, b] += g


def assemble(c, x, w, xprev, dt, t, dc, gmin, J, f):
    """Fill Jacobian ``J`` and residual ``f`` (currents leaving each node).

    ``dc`` drops capacitors and enforces initial-condition constraints.
    Returns the number of clamped exponent evaluations.
    """
    nn = c.n_nodes
    J.fill(0.0)
    f.fill(0.0)
    xl = x.tolist()

    def V(i):
        return xl[i] if i >= 0 else 0.0

    for i in range(nn):
        J[i, i] += gmin
        f[i] += gmin * xl[i]

    for a, b, g in zip(c.res_a.tolist(), c.res_b.tolist(), c.res_g.tolist()):
        cur = g * (V(a) - V(b))
        if a >= 0:
            f[a] += cur
        if b >= 0:
            f[b] -= cur
        _stamp_g(J, a, b, g)

    if not dc:
        xp = xprev.tolist()
        for a, b, cap in zip(c.cap_a.tolist(), c.cap_b.tolist(), c.cap_c.tolist()):
            g = cap / dt
            vold = (xp[a] if a >= 0 else 0.0) - (xp[b] if b >= 0 else 0.0)
            cur = g * (V(a) - V(b) - vold)
            if a >= 0:
                f[a] += cur
            if b >= 0:
                f[b] -= cur
            _stamp_g(J, a, b, g)

    for k in range(len(c.mos_d)):
        d, g_, s = int(c.mos_d[k]), int(c.mos_g[k]), int(c.mos_s[k])
        beta, vth, lam, pol = c.mos_par[k]
        vs = V(s)
        ids, gm, gds = mosfet_eval(beta, vth, lam, pol, V(g_) - vs, V(d) - vs)
        if d >= 0:
            f[d] += ids
            J[d, d] += gds
            if g_ >= 0:
                J[d, g_] += gm
            if s >= 0:
                J[d, s] -= gm + gds
        if s >= 0:
            f[s] -= ids
            if d >= 0:
                J[s, d] -= gds
            if g_ >= 0:
                J[s, g_] -= gm
            J[s, s] += gm + gds

    clamps = 0
    for k in range(len(c.mem_p)):
        a, b = int(c.mem_p[k]), int(c.mem_n[k])
        cur, g, nc = memristor_iv(c.mem_par[k], float(w[k]), V(a) - V(b))
        clamps += nc
        if a >= 0:
            f[a] += cur
        if b >= 0:
            f[b] -= cur
        _stamp_g(J, a, b, g)

    row = nn
    for j in range(len(c.src_p)):
        a, b = int(c.src_p[j]), int(c.src_n[j])
        ibr = xl[row]
        if a >= 0:
            f[a] += ibr
            J[a, row] += 1.0
            J[row, a] += 1.0
        if b >= 0:
            f[b] -= ibr
            J[b, row] -= 1.0
            J[row, b] -= 1.0
        f[row] = V(a) - V(b) - source_value(c, j, t)
        row += 1

    if dc:
        for j in range(len(c.ic_v)):
            a, b = int(c.ic_a[j]), int(c.ic_b[j])
            ibr = xl[row]
            if a >= 0:
                f[a] += ibr
                J[a, row] += 1.0
                J[row, a] += 1.0
            if b >= 0:
                f[b] -= ibr
                J[b, row] -= 1.0
                J[row, b] -= 1.0
            f[row] = V(a) - V(b) - c.ic_v[j]
            row += 1
    return clamps


def zero_pivot(J):
    """Index of the first unknown whose pivot vanishes under partial pivoting."""
    A = np.array(J, dtype=float)
    n = A.shape[0]
    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if A[p, k] == 0.0:
            return k
        if p != k:
            A[[k, p]] = A[[p, k]]
        A[k + 1:, k:] -= np.outer(A[k + 1:, k] / A[k, k], A[k, k:])
    return -1


def newton(c, x, w, xprev, dt, t, dc, gmin, vtol, itol, maxit):
    """Newton iteration in place on ``x``.

    Returns ``(status, iterations, worst, clamps)`` where ``worst`` is the node
    with the largest residual (or the zero-pivot unknown when singular).
    """
    n = c.dc_size if dc else c.size
    nn = c.n_nodes
    J = np.empty((n, n))
    f = np.empty(n)
    last_dv = math.inf
    worst = -1
    clamps = 0
    for it in range(maxit):
        clamps += assemble(c, x, w, xprev, dt, t, dc, gmin, J, f)
        if nn:
            fa = np.abs(f[:nn])
            worst = int(np.argmax(fa))
            res = float(fa[worst])
        else:
            res = 0.0
        if it > 0 and res <= itol and last_dv <= vtol:
            return OK, it, worst, clamps
        try:
            delta = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            return SINGULAR, it, zero_pivot(J), clamps
        if not np.all(np.isfinite(delta)):
            return SINGULAR, it, zero_pivot(J), clamps
        dv = float(np.max(np.abs(delta[:nn]))) if nn else 0.0
        if dv > MAX_NEWTON_STEP:
            delta *= MAX_NEWTON_STEP / dv
            dv = MAX_NEWTON_STEP
        x += delta
        last_dv = dv
        if res <= itol and dv <= vtol:
            return OK, it + 1, worst, clamps
    return NO_CONVERGENCE, maxit, worst, clamps


def _advance_all(c, x, w, h):
    for k in range(len(c.mem_p)):
        a, b = int(c.mem_p[k]), int(c.mem_n[k])
        v = (x[a] if a >= 0 else 0.0) - (x[b] if b >= 0 else 0.0)
        w[k] = advance_state(float(w[k]), float(v), h, c.mem_par[k])


def transient(c, x0, w0, dt, nsteps, gmin, vtol, itol, maxit, max_halvings):
    """Fixed-step backward-Euler march.

    Returns ``(X, W, status, fail_step, worst, clamps)``; rows of ``X``/``W``
    are the solution and memristor states at ``t = n * dt``.
    """
    n = c.size
    X = np.empty((nsteps + 1, n))
    W = np.empty((nsteps + 1, len(c.mem_p)))
    x = np.array(x0[:n], dtype=float)
    w = np.array(w0, dtype=float)
    X[0] = x
    W[0] = w
    clamps = 0
    for step in range(nsteps):
        t0 = step * dt
        done = False
        status, worst = OK, -1
        for k in range(max_halvings + 1):
            nsub = 1 << k
            h = dt / nsub
            xs, ws = x.copy(), w.copy()
            for j in range(nsub):
                tj = (step + 1) * dt if j == nsub - 1 else t0 + (j + 1) * h
                xprev = xs.copy()
                status, _, worst, nc = newton(c, xs, ws, xprev, h, tj, False, gmin, vtol, itol, maxit)
                clamps += nc
                if status != OK:
                    break
                _advance_all(c, xs, ws, h)
            if status == OK:
                x, w = xs, ws
                done = True
                break
        if not done:
            return X[: step + 1], W[: step + 1], status, step + 1, worst, clamps
        X[step + 1] = x
        W[step + 1] = w
    return X, W, OK, -1, -1, clamps
