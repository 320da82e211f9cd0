# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled solver kernel.

Same functions and return conventions as ``_pykernel``; the whole transient
march (assembly, dense LU, state update) runs without touching Python objects.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, fabs, fmod, sin, M_PI, isfinite
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy, memset

cnp.import_array()

NAME = "cython"

OK, NO_CONVERGENCE, SINGULAR = 0, 1, 2
DEF C_OK = 0
DEF C_NOCONV = 1
DEF C_SINGULAR = 2

DEF EXP_LIMIT = 80.0
DEF MAX_STATE_STEP = 0.01
DEF MAX_NEWTON_STEP = 1.0
DEF LN11 = 0.09531017980432493

DEF SRC_DC = 0
DEF SRC_PULSE = 1
DEF SRC_PWL = 2
DEF SRC_SIN = 3


cdef struct Ckt:
    int nn, ns, nic
    int nres, ncap, nmos, nmem
    int *res_a
    int *res_b
    double *res_g
    int *cap_a
    int *cap_b
    double *cap_c
    int *mos_d
    int *mos_g
    int *mos_s
    double *mos_par
    int *mem_p
    int *mem_n
    double *mem_par
    int *src_p
    int *src_n
    int *src_kind
    double *src_par
    int *pwl_off
    double *pwl_t
    double *pwl_v
    int *ic_a
    int *ic_b
    double *ic_v


cdef class _Packed:
    """Holds contiguous copies of the circuit arrays and a Ckt view on them."""

    cdef Ckt c
    cdef list keep

    def __init__(self, circ):
        self.keep = []
        c = &self.c
        c.nn = circ.n_nodes
        c.ns = len(circ.source_names)
        c.nic = len(circ.ic_v)
        c.nres = len(circ.res_g)
        c.ncap = len(circ.cap_c)
        c.nmos = len(circ.mos_d)
        c.nmem = len(circ.mem_p)
        c.res_a = self._i(circ.res_a)
        c.res_b = self._i(circ.res_b)
        c.res_g = self._d(circ.res_g)
        c.cap_a = self._i(circ.cap_a)
        c.cap_b = self._i(circ.cap_b)
        c.cap_c = self._d(circ.cap_c)
        c.mos_d = self._i(circ.mos_d)
        c.mos_g = self._i(circ.mos_g)
        c.mos_s = self._i(circ.mos_s)
        c.mos_par = self._d(circ.mos_par)
        c.mem_p = self._i(circ.mem_p)
        c.mem_n = self._i(circ.mem_n)
        c.mem_par = self._d(circ.mem_par)
        c.src_p = self._i(circ.src_p)
        c.src_n = self._i(circ.src_n)
        c.src_kind = self._i(circ.src_kind)
        c.src_par = self._d(circ.src_par)
        c.pwl_off = self._i(circ.pwl_off)
        c.pwl_t = self._d(circ.pwl_t)
        c.pwl_v = self._d(circ.pwl_v)
        c.ic_a = self._i(circ.ic_a)
        c.ic_b = self._i(circ.ic_b)
        c.ic_v = self._d(circ.ic_v)

    cdef int *_i(self, arr) except? NULL:
        cdef cnp.ndarray a = np.ascontiguousarray(arr, dtype=np.int32).reshape(-1)
        if a.shape[0] == 0:
            a = np.zeros(1, dtype=np.int32)
        self.keep.append(a)
        return <int *> cnp.PyArray_DATA(a)

    cdef double *_d(self, arr) except? NULL:
        cdef cnp.ndarray a = np.ascontiguousarray(arr, dtype=np.float64).reshape(-1)
        if a.shape[0] == 0:
            a = np.zeros(1, dtype=np.float64)
        self.keep.append(a)
        return <double *> cnp.PyArray_DATA(a)


# ---------------------------------------------------------------------------
# device evaluation
# ---------------------------------------------------------------------------

cdef inline double _window(double w, double p) nogil:
    if w <= 0.1:
        return p * log1p(w)
    if w <= 0.9:
        return p * LN11
    return p * log(2.0 - w)


cdef inline double _ipow(double v, int m) nogil:
    cdef double r = 1.0
    cdef int i
    for i in range(m):
        r *= v
    return r


cdef double _advance(double w, double v, double dt, double *par) nogil:
    cdef double k = par[8], p = par[10], w_min = par[11], w_max = par[12]
    cdef int m = <int> par[9]
    cdef double drive = k * _ipow(v, m)
    cdef double remaining = dt, rate, dist, bound, arate, h, wn
    cdef bint absorbing
    if drive == 0.0:
        return w
    if w < w_min:
        w = w_min
    if w > w_max:
        w = w_max
    while remaining > 0.0:
        rate = drive * _window(w, p)
        if rate == 0.0:
            break
        if rate > 0:
            dist = w_max - w; bound = w_max; absorbing = w_max >= 1.0
        else:
            dist = w - w_min; bound = w_min; absorbing = w_min <= 0.0
        if dist <= 0.0:
            break
        arate = fabs(rate)
        h = remaining
        if MAX_STATE_STEP / arate < h:
            h = MAX_STATE_STEP / arate
        if not absorbing and dist / arate <= h:
            w = bound
            break
        if absorbing and 0.5 * dist / arate < h:
            h = 0.5 * dist / arate
        wn = w + rate * h
        if wn == w:  # within one ulp of the bound
            break
        w = wn
        remaining -= h
    if w > w_max:
        w = w_max
    if w < w_min:
        w = w_min
    return w


cdef inline int _mem_iv(double *par, double w, double v, double *cur, double *g) nogil:
    cdef int clamps = 0
    cdef double xd = par[7] * v, x, e, ed, wa, b, a, al
    if xd > EXP_LIMIT:
        xd = EXP_LIMIT
        clamps += 1
    ed = exp(xd)
    if v >= 0.0:
        b = par[0]; a = par[2]; al = par[4]
    else:
        b = par[1]; a = par[3]; al = par[5]
    x = al * v
    if x > EXP_LIMIT:
        x = EXP_LIMIT
        clamps += 1
    e = exp(x)
    if a == 1.0:
        wa = b * w
    else:
        wa = b * w ** a
    cur[0] = wa * (e - 1.0) + par[6] * (ed - 1.0)
    g[0] = wa * al * e + par[6] * par[7] * ed
    return clamps


cdef inline void _square_law(double beta, double vth, double lam, double vgs, double vds,
                             double *i, double *gm, double *gds) nogil:
    cdef double vov = vgs - vth, clm, core
    if vov <= 0.0:
        i[0] = 0.0; gm[0] = 0.0; gds[0] = 0.0
        return
    clm = 1.0 + lam * vds
    if vds < vov:
        core = vov * vds - 0.5 * vds * vds
        i[0] = beta * core * clm
        gm[0] = beta * vds * clm
        gds[0] = beta * ((vov - vds) * clm + lam * core)
    else:
        core = 0.5 * vov * vov
        i[0] = beta * core * clm
        gm[0] = beta * vov * clm
        gds[0] = beta * core * lam


cdef inline void _mos(double *par, double vgs, double vds, double *i, double *gm, double *gds) nogil:
    cdef double pol = par[3]
    cdef double vgn = pol * vgs, vdn = pol * vds, ii, a, b
    if vdn >= 0.0:
        _square_law(par[0], par[1], par[2], vgn, vdn, &ii, gm, gds)
        i[0] = pol * ii
    else:
        _square_law(par[0], par[1], par[2], vgn - vdn, -vdn, &ii, &a, &b)
        i[0] = -pol * ii
        gm[0] = -a
        gds[0] = a + b


cdef double _source(Ckt *c, int j, double t) nogil:
    cdef int kind = c.src_kind[j], lo, hi, mid
    cdef double *par = c.src_par + 7 * j
    cdef double tau
    if kind == SRC_DC:
        return par[0]
    if kind == SRC_PULSE:
        if t < par[2]:
            return par[0]
        tau = fmod(t - par[2], par[6])
        if tau < par[3]:
            return par[0] + (par[1] - par[0]) * tau / par[3]
        tau -= par[3]
        if tau < par[5]:
            return par[1]
        tau -= par[5]
        if tau < par[4]:
            return par[1] - (par[1] - par[0]) * tau / par[4]
        return par[0]
    if kind == SRC_SIN:
        return par[0] + par[1] * sin(2.0 * M_PI * par[2] * t)
    lo = c.pwl_off[j]
    hi = c.pwl_off[j + 1]
    if t <= c.pwl_t[lo]:
        return c.pwl_v[lo]
    if t >= c.pwl_t[hi - 1]:
        return c.pwl_v[hi - 1]
    # first index with pwl_t > t
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if c.pwl_t[mid] > t:
            hi = mid
        else:
            lo = mid
    return c.pwl_v[lo] + (c.pwl_v[hi] - c.pwl_v[lo]) * (t - c.pwl_t[lo]) / (c.pwl_t[hi] - c.pwl_t[lo])


# ---------------------------------------------------------------------------
# assembly and linear algebra
# ---------------------------------------------------------------------------

cdef inline double _V(double *x, int i) nogil:
    return x[i] if i >= 0 else 0.0


cdef inline void _stamp_g(double *J, int n, int a, int b, double g) nogil:
    if a >= 0:
        J[a * n + a] += g
        if b >= 0:
            J[a * n + b] -= g
            J[b * n + a] -= g
    if b >= 0:
        J[b * n + b] += g


cdef inline void _stamp_branch(double *J, double *f, int n, int row, int a, int b, double ibr) nogil:
    if a >= 0:
        f[a] += ibr
        J[a * n + row] += 1.0
        J[row * n + a] += 1.0
    if b >= 0:
        f[b] -= ibr
        J[b * n + row] -= 1.0
        J[row * n + b] -= 1.0


cdef int _assemble(Ckt *c, double *x, double *w, double *xprev, double dt, double t, bint dc,
                   double gmin, double *J, double *f, int n) nogil:
    cdef int nn = c.nn, i, k, a, b, d, g_, s, row
    cdef double cur, g, vs, ids, gm, gds, vold
    cdef int clamps = 0
    memset(J, 0, n * n * sizeof(double))
    memset(f, 0, n * sizeof(double))
    for i in range(nn):
        J[i * n + i] += gmin
        f[i] += gmin * x[i]
    for k in range(c.nres):
        a = c.res_a[k]; b = c.res_b[k]; g = c.res_g[k]
        cur = g * (_V(x, a) - _V(x, b))
        if a >= 0:
            f[a] += cur
        if b >= 0:
            f[b] -= cur
        _stamp_g(J, n, a, b, g)
    if not dc:
        for k in range(c.ncap):
            a = c.cap_a[k]; b = c.cap_b[k]
            g = c.cap_c[k] / dt
            vold = _V(xprev, a) - _V(xprev, b)
            cur = g * (_V(x, a) - _V(x, b) - vold)
            if a >= 0:
                f[a] += cur
            if b >= 0:
                f[b] -= cur
            _stamp_g(J, n, a, b, g)
    for k in range(c.nmos):
        d = c.mos_d[k]; g_ = c.mos_g[k]; s = c.mos_s[k]
        vs = _V(x, s)
        _mos(c.mos_par + 4 * k, _V(x, g_) - vs, _V(x, d) - vs, &ids, &gm, &gds)
        if d >= 0:
            f[d] += ids
            J[d * n + d] += gds
            if g_ >= 0:
                J[d * n + g_] += gm
            if s >= 0:
                J[d * n + s] -= gm + gds
        if s >= 0:
            f[s] -= ids
            if d >= 0:
                J[s * n + d] -= gds
            if g_ >= 0:
                J[s * n + g_] -= gm
            J[s * n + s] += gm + gds
    for k in range(c.nmem):
        a = c.mem_p[k]; b = c.mem_n[k]
        clamps += _mem_iv(c.mem_par + 13 * k, w[k], _V(x, a) - _V(x, b), &cur, &g)
        if a >= 0:
            f[a] += cur
        if b >= 0:
            f[b] -= cur
        _stamp_g(J, n, a, b, g)
    row = nn
    for k in range(c.ns):
        a = c.src_p[k]; b = c.src_n[k]
        _stamp_branch(J, f, n, row, a, b, x[row])
        f[row] = _V(x, a) - _V(x, b) - _source(c, k, t)
        row += 1
    if dc:
        for k in range(c.nic):
            a = c.ic_a[k]; b = c.ic_b[k]
            _stamp_branch(J, f, n, row, a, b, x[row])
            f[row] = _V(x, a) - _V(x, b) - c.ic_v[k]
            row += 1
    return clamps


cdef int _lu_solve(double *A, double *bvec, int n, int *piv) nogil:
    """Solve A x = b in place (x in ``bvec``); returns -1 or the zero-pivot column."""
    cdef int i, j, k, p
    cdef double amax, tmp, l
    for k in range(n):
        p = k
        amax = fabs(A[k * n + k])
        for i in range(k + 1, n):
            tmp = fabs(A[i * n + k])
            if tmp > amax:
                amax = tmp
                p = i
        if amax == 0.0:
            return k
        if p != k:
            for j in range(n):
                tmp = A[k * n + j]; A[k * n + j] = A[p * n + j]; A[p * n + j] = tmp
            tmp = bvec[k]; bvec[k] = bvec[p]; bvec[p] = tmp
        for i in range(k + 1, n):
            l = A[i * n + k] / A[k * n + k]
            if l != 0.0:
                A[i * n + k] = l
                for j in range(k + 1, n):
                    A[i * n + j] -= l * A[k * n + j]
                bvec[i] -= l * bvec[k]
    for i in range(n - 1, -1, -1):
        tmp = bvec[i]
        for j in range(i + 1, n):
            tmp -= A[i * n + j] * bvec[j]
        bvec[i] = tmp / A[i * n + i]
    return -1


cdef struct Work:
    double *J
    double *f
    int *piv


cdef int _newton(Ckt *c, double *x, double *w, double *xprev, double dt, double t, bint dc,
                 double gmin, double vtol, double itol, int maxit, int n, Work *wk,
                 int *iters, int *worst, int *clamps) nogil:
    cdef int nn = c.nn, it, i, zp
    cdef double last_dv = 1e300, res, dv, scale, a
    worst[0] = -1
    for it in range(maxit):
        clamps[0] += _assemble(c, x, w, xprev, dt, t, dc, gmin, wk.J, wk.f, n)
        res = -1.0
        for i in range(nn):
            a = fabs(wk.f[i])
            if a > res:
                res = a
                worst[0] = i
        if res < 0.0:
            res = 0.0
        if it > 0 and res <= itol and last_dv <= vtol:
            iters[0] = it
            return C_OK
        for i in range(n):
            wk.f[i] = -wk.f[i]
        zp = _lu_solve(wk.J, wk.f, n, wk.piv)
        if zp >= 0:
            worst[0] = zp
            iters[0] = it
            return C_SINGULAR
        dv = 0.0
        for i in range(n):
            if not isfinite(wk.f[i]):
                worst[0] = i
                iters[0] = it
                return C_SINGULAR
        for i in range(nn):
            a = fabs(wk.f[i])
            if a > dv:
                dv = a
        scale = 1.0
        if dv > MAX_NEWTON_STEP:
            scale = MAX_NEWTON_STEP / dv
            dv = MAX_NEWTON_STEP
        for i in range(n):
            x[i] += scale * wk.f[i]
        last_dv = dv
        if res <= itol and dv <= vtol:
            iters[0] = it + 1
            return C_OK
    iters[0] = maxit
    return C_NOCONV


cdef void _advance_all(Ckt *c, double *x, double *w, double h) nogil:
    cdef int k, a, b
    for k in range(c.nmem):
        a = c.mem_p[k]; b = c.mem_n[k]
        w[k] = _advance(w[k], _V(x, a) - _V(x, b), h, c.mem_par + 13 * k)


cdef Work _work_alloc(int n):
    cdef Work wk
    wk.J = <double *> malloc(n * n * sizeof(double) + 8)
    wk.f = <double *> malloc(n * sizeof(double) + 8)
    wk.piv = <int *> malloc(n * sizeof(int) + 8)
    if wk.J == NULL or wk.f == NULL or wk.piv == NULL:
        free(wk.J); free(wk.f); free(wk.piv)
        raise MemoryError()
    return wk


cdef void _work_free(Work *wk):
    free(wk.J); free(wk.f); free(wk.piv)


# ---------------------------------------------------------------------------
# Python-visible API (mirrors _pykernel)
# ---------------------------------------------------------------------------

def advance_state(double w, double v, double dt, par):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] p = np.ascontiguousarray(par, dtype=np.float64)
    return _advance(w, v, dt, <double *> p.data)


def memristor_iv(par, double w, double v):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] p = np.ascontiguousarray(par, dtype=np.float64)
    cdef double cur, g
    cdef int nc = _mem_iv(<double *> p.data, w, v, &cur, &g)
    return cur, g, nc


def source_value(circ, int j, double t):
    cdef _Packed pk = _Packed(circ)
    return _source(&pk.c, j, t)


def assemble(circ, x, w, xprev, double dt, double t, bint dc, double gmin, J, f):
    cdef _Packed pk = _Packed(circ)
    cdef int n = (circ.dc_size if dc else circ.size)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xa = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wa = np.ascontiguousarray(w, dtype=np.float64).reshape(-1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pa = np.ascontiguousarray(xprev, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Jm = np.zeros((n, n))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] fm = np.zeros(n)
    if wa.shape[0] == 0:
        wa = np.zeros(1)
    clamps = _assemble(&pk.c, <double *> xa.data, <double *> wa.data, <double *> pa.data, dt, t, dc,
                       gmin, <double *> Jm.data, <double *> fm.data, n)
    J[...] = Jm
    f[...] = fm
    return clamps


def newton(circ, x, w, xprev, double dt, double t, bint dc, double gmin, double vtol,
           double itol, int maxit):
    """In-place Newton on ``x`` (must be a contiguous float64 array)."""
    cdef _Packed pk = _Packed(circ)
    cdef int n = (circ.dc_size if dc else circ.size)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xa = x
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wa = np.ascontiguousarray(w, dtype=np.float64).reshape(-1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pa = np.array(xprev, dtype=np.float64)
    cdef int iters = 0, worst = -1, clamps = 0, status
    cdef Work wk = _work_alloc(n)
    if wa.shape[0] == 0:
        wa = np.zeros(1)
    if pa.shape[0] < n:
        pa = np.concatenate([pa, np.zeros(n - pa.shape[0])])
    try:
        status = _newton(&pk.c, <double *> xa.data, <double *> wa.data, <double *> pa.data, dt, t, dc,
                         gmin, vtol, itol, maxit, n, &wk, &iters, &worst, &clamps)
    finally:
        _work_free(&wk)
    return status, iters, worst, clamps


def transient(circ, x0, w0, double dt, int nsteps, double gmin, double vtol, double itol,
              int maxit, int max_halvings):
    cdef _Packed pk = _Packed(circ)
    cdef Ckt *c = &pk.c
    cdef int n = circ.size, nm = c.nmem, step, k, j, nsub, iters = 0, worst = -1, status = C_OK
    cdef int clamps = 0
    cdef double t0, h, tj
    cdef bint done
    cdef cnp.ndarray[cnp.float64_t, ndim=2] X = np.empty((nsteps + 1, n))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] W = np.empty((nsteps + 1, nm))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xv = np.array(x0[:n], dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wv = np.zeros(max(nm, 1))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xs = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ws = np.zeros(max(nm, 1))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xp = np.zeros(n)
    cdef double *x = <double *> xv.data
    cdef double *w = <double *> wv.data
    cdef double *pxs = <double *> xs.data
    cdef double *pws = <double *> ws.data
    cdef double *pxp = <double *> xp.data
    cdef double *Xd = <double *> X.data
    cdef double *Wd = <double *> W.data
    cdef Work wk = _work_alloc(n)
    cdef int fail_step = -1
    if nm:
        wv[:nm] = np.asarray(w0, dtype=np.float64)
    try:
        with nogil:
            memcpy(Xd, x, n * sizeof(double))
            if nm:
                memcpy(Wd, w, nm * sizeof(double))
            for step in range(nsteps):
                t0 = step * dt
                done = False
                for k in range(max_halvings + 1):
                    nsub = 1 << k
                    h = dt / nsub
                    memcpy(pxs, x, n * sizeof(double))
                    if nm:
                        memcpy(pws, w, nm * sizeof(double))
                    for j in range(nsub):
                        tj = (step + 1) * dt if j == nsub - 1 else t0 + (j + 1) * h
                        memcpy(pxp, pxs, n * sizeof(double))
                        status = _newton(c, pxs, pws, pxp, h, tj, False, gmin, vtol, itol, maxit, n,
                                         &wk, &iters, &worst, &clamps)
                        if status != C_OK:
                            break
                        _advance_all(c, pxs, pws, h)
                    if status == C_OK:
                        memcpy(x, pxs, n * sizeof(double))
                        if nm:
                            memcpy(w, pws, nm * sizeof(double))
                        done = True
                        break
                if not done:
                    fail_step = step + 1
                    break
                memcpy(Xd + (step + 1) * n, x, n * sizeof(double))
                if nm:
                    memcpy(Wd + (step + 1) * nm, w, nm * sizeof(double))
    finally:
        _work_free(&wk)
    if fail_step >= 0:
        return X[:fail_step], W[:fail_step], status, fail_step, worst, clamps
    return X, W, C_OK, -1, -1, clamps
