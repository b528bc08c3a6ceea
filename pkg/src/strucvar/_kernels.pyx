# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled prox operators and the Gram-form accelerated prox-gradient loop.

Same API as ``strucvar._pykernels``. All loops run without the GIL so row
fits dispatched from a thread pool execute concurrently.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, isfinite, INFINITY
from libc.stdlib cimport malloc, free, qsort

cnp.import_array()

KIND_L1 = 0
KIND_GROUP = 1
KIND_SGL = 2
KIND_OWL = 3
KIND_RIDGE = 4

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_STEP_UNDERFLOW = 2

ctypedef struct keyed:
    double key
    Py_ssize_t idx


cdef int _cmp_desc(const void* a, const void* b) noexcept nogil:
    cdef const keyed* ka = <const keyed*>a
    cdef const keyed* kb = <const keyed*>b
    if ka.key > kb.key:
        return -1
    if ka.key < kb.key:
        return 1
    # ties keep original index order
    if ka.idx < kb.idx:
        return -1
    if ka.idx > kb.idx:
        return 1
    return 0


cdef inline double _sign(double v) noexcept nogil:
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


cdef struct Workspace:
    keyed* keys
    double* sums
    Py_ssize_t* counts
    double* buf


cdef int _ws_alloc(Workspace* ws, Py_ssize_t n) noexcept nogil:
    ws.keys = <keyed*>malloc((n + 1) * sizeof(keyed))
    ws.sums = <double*>malloc((n + 1) * sizeof(double))
    ws.counts = <Py_ssize_t*>malloc((n + 1) * sizeof(Py_ssize_t))
    ws.buf = <double*>malloc((n + 1) * sizeof(double))
    if ws.keys == NULL or ws.sums == NULL or ws.counts == NULL or ws.buf == NULL:
        return -1
    return 0


cdef void _ws_free(Workspace* ws) noexcept nogil:
    free(ws.keys)
    free(ws.sums)
    free(ws.counts)
    free(ws.buf)


cdef void _soft(const double* v, double t, double* out, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double a
    for i in range(n):
        a = fabs(v[i]) - t
        out[i] = _sign(v[i]) * a if a > 0.0 else 0.0


cdef void _group_shrink_inplace(double* out, double t, const cnp.int64_t* gidx,
                                const cnp.int64_t* gptr, Py_ssize_t ngroups) noexcept nogil:
    cdef Py_ssize_t k, j
    cdef double nrm, scale
    for k in range(ngroups):
        nrm = 0.0
        for j in range(gptr[k], gptr[k + 1]):
            nrm += out[gidx[j]] * out[gidx[j]]
        nrm = sqrt(nrm)
        if nrm <= t:
            scale = 0.0
        else:
            scale = 1.0 - t / nrm
        for j in range(gptr[k], gptr[k + 1]):
            out[gidx[j]] *= scale


cdef void _prox_owl(const double* v, double t, const double* w, double* out,
                    Py_ssize_t n, Workspace* ws) noexcept nogil:
    cdef Py_ssize_t i, nb, pos, c
    cdef double mean
    for i in range(n):
        ws.keys[i].key = fabs(v[i])
        ws.keys[i].idx = i
    qsort(ws.keys, n, sizeof(keyed), _cmp_desc)
    nb = 0
    for i in range(n):
        ws.sums[nb] = ws.keys[i].key - t * w[i]
        ws.counts[nb] = 1
        nb += 1
        while nb > 1 and ws.sums[nb - 2] / ws.counts[nb - 2] <= ws.sums[nb - 1] / ws.counts[nb - 1]:
            ws.sums[nb - 2] += ws.sums[nb - 1]
            ws.counts[nb - 2] += ws.counts[nb - 1]
            nb -= 1
    pos = 0
    for i in range(nb):
        mean = ws.sums[i] / ws.counts[i]
        if mean < 0.0:
            mean = 0.0
        for c in range(ws.counts[i]):
            out[ws.keys[pos].idx] = _sign(v[ws.keys[pos].idx]) * mean
            pos += 1


cdef int _prox(const double* v, double t, int kind, const cnp.int64_t* gidx,
               const cnp.int64_t* gptr, Py_ssize_t ngroups, double alpha,
               const double* w, double* out, Py_ssize_t n, Workspace* ws) noexcept nogil:
    cdef Py_ssize_t i
    if kind == 0:
        _soft(v, t, out, n)
    elif kind == 1:
        for i in range(n):
            out[i] = v[i]
        _group_shrink_inplace(out, t, gidx, gptr, ngroups)
    elif kind == 2:
        _soft(v, t * alpha, out, n)
        _group_shrink_inplace(out, t * (1.0 - alpha), gidx, gptr, ngroups)
    elif kind == 3:
        _prox_owl(v, t, w, out, n, ws)
    elif kind == 4:
        for i in range(n):
            out[i] = v[i] / (1.0 + 2.0 * t)
    else:
        return -1
    return 0


cdef double _value(const double* v, int kind, const cnp.int64_t* gidx,
                   const cnp.int64_t* gptr, Py_ssize_t ngroups, double alpha,
                   const double* w, Py_ssize_t n, Workspace* ws) noexcept nogil:
    cdef Py_ssize_t i, k, j
    cdef double l1 = 0.0, gl = 0.0, nrm, acc = 0.0
    if kind == 0 or kind == 2:
        for i in range(n):
            l1 += fabs(v[i])
        if kind == 0:
            return l1
    if kind == 1 or kind == 2:
        for k in range(ngroups):
            nrm = 0.0
            for j in range(gptr[k], gptr[k + 1]):
                nrm += v[gidx[j]] * v[gidx[j]]
            gl += sqrt(nrm)
        if kind == 1:
            return gl
        return alpha * l1 + (1.0 - alpha) * gl
    if kind == 3:
        for i in range(n):
            ws.keys[i].key = fabs(v[i])
            ws.keys[i].idx = i
        qsort(ws.keys, n, sizeof(keyed), _cmp_desc)
        for i in range(n):
            acc += w[i] * ws.keys[i].key
        return acc
    if kind == 4:
        for i in range(n):
            acc += v[i] * v[i]
        return acc
    return INFINITY


cdef inline void _matvec(const double* G, const double* x, double* out, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += G[i * n + j] * x[j]
        out[i] = acc


cdef inline double _dot(const double* a, const double* b, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(n):
        acc += a[i] * b[i]
    return acc


cdef inline double _smooth(const double* c, double yy, const double* z,
                           const double* Gz, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double lin = 0.0, quad = 0.0
    for i in range(n):
        lin += c[i] * z[i]
        quad += z[i] * Gz[i]
    return yy - lin + 0.5 * quad


cdef inline double _smooth_diff(const double* c, const double* z, const double* Gz,
                                const double* w, const double* Gw, Py_ssize_t n) noexcept nogil:
    # f(z) - f(w) without the cancellation of differencing two objectives
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(n):
        acc += (z[i] - w[i]) * (0.5 * (Gz[i] + Gw[i]) - c[i])
    return acc


def _as_i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def _as_f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def soft_threshold(v, double t):
    cdef const double[::1] vv = _as_f64(v)
    out = np.empty(vv.shape[0])
    cdef double[::1] oo = out
    with nogil:
        _soft(&vv[0], t, &oo[0], vv.shape[0])
    return out


def pava_nonincreasing(z):
    """Project ``z`` onto the cone of non-increasing sequences (L2)."""
    cdef const double[::1] zz = _as_f64(z)
    cdef Py_ssize_t n = zz.shape[0], i, nb = 0, pos = 0, c
    out = np.empty(n)
    cdef double[::1] oo = out
    sums_a = np.empty(n)
    counts_a = np.empty(n, dtype=np.intp)
    cdef double[::1] sums = sums_a
    cdef Py_ssize_t[::1] counts = counts_a
    for i in range(n):
        sums[nb] = zz[i]
        counts[nb] = 1
        nb += 1
        while nb > 1 and sums[nb - 2] / counts[nb - 2] <= sums[nb - 1] / counts[nb - 1]:
            sums[nb - 2] += sums[nb - 1]
            counts[nb - 2] += counts[nb - 1]
            nb -= 1
    for i in range(nb):
        for c in range(counts[i]):
            oo[pos] = sums[i] / counts[i]
            pos += 1
    return out


def prox(v, double t, int kind, gidx, gptr, double alpha, weights):
    cdef const double[::1] vv = _as_f64(v)
    cdef const cnp.int64_t[::1] gi = _as_i64(gidx)
    cdef const cnp.int64_t[::1] gp = _as_i64(gptr)
    cdef const double[::1] ww = _as_f64(weights)
    cdef Py_ssize_t n = vv.shape[0]
    cdef Py_ssize_t ngroups = gp.shape[0] - 1 if gp.shape[0] > 0 else 0
    out = np.empty(n)
    cdef double[::1] oo = out
    cdef Workspace ws
    cdef int rc
    if n == 0:
        return out
    if _ws_alloc(&ws, n) != 0:
        _ws_free(&ws)
        raise MemoryError()
    with nogil:
        rc = _prox(&vv[0], t, kind,
                   &gi[0] if gi.shape[0] > 0 else NULL,
                   &gp[0] if gp.shape[0] > 0 else NULL,
                   ngroups, alpha,
                   &ww[0] if ww.shape[0] > 0 else NULL,
                   &oo[0], n, &ws)
    _ws_free(&ws)
    if rc != 0:
        raise ValueError(f"unknown penalty kind code {kind}")
    return out


def prox_owl(v, double t, weights):
    return prox(v, t, KIND_OWL, np.empty(0, np.int64), np.empty(0, np.int64), 0.0, weights)


def penalty_value(v, int kind, gidx, gptr, double alpha, weights):
    cdef const double[::1] vv = _as_f64(v)
    cdef const cnp.int64_t[::1] gi = _as_i64(gidx)
    cdef const cnp.int64_t[::1] gp = _as_i64(gptr)
    cdef const double[::1] ww = _as_f64(weights)
    cdef Py_ssize_t n = vv.shape[0]
    cdef Py_ssize_t ngroups = gp.shape[0] - 1 if gp.shape[0] > 0 else 0
    cdef Workspace ws
    cdef double val
    if kind < 0 or kind > 4:
        raise ValueError(f"unknown penalty kind code {kind}")
    if n == 0:
        return 0.0
    if _ws_alloc(&ws, n) != 0:
        _ws_free(&ws)
        raise MemoryError()
    with nogil:
        val = _value(&vv[0], kind,
                     &gi[0] if gi.shape[0] > 0 else NULL,
                     &gp[0] if gp.shape[0] > 0 else NULL,
                     ngroups, alpha,
                     &ww[0] if ww.shape[0] > 0 else NULL, n, &ws)
    _ws_free(&ws)
    return val


def fista_gram(G, c, double yy, beta0, double lam, int kind, gidx, gptr,
               double alpha, weights, double step0, Py_ssize_t max_iters,
               double tol, double backtrack, bint restart):
    """Monotone accelerated proximal gradient on a Gram-form quadratic.

    Minimises ``yy - c.x + 0.5 x.G.x + lam * R(x)``. Descent and line-search
    tests use objective differences; ``trace`` accumulates accepted decrements.

    Returns ``(x, iters, objective, residual, converged, trace, status, step)``.
    """
    cdef const double[:, ::1] GG = _as_f64(G)
    cdef const double[::1] cc = _as_f64(c)
    cdef const cnp.int64_t[::1] gi = _as_i64(gidx)
    cdef const cnp.int64_t[::1] gp = _as_i64(gptr)
    cdef const double[::1] ww = _as_f64(weights)
    cdef Py_ssize_t n = cc.shape[0]
    cdef Py_ssize_t ngroups = gp.shape[0] - 1 if gp.shape[0] > 0 else 0
    if kind < 0 or kind > 4:
        raise ValueError(f"unknown penalty kind code {kind}")

    x_a = np.array(beta0, dtype=np.float64, copy=True)
    trace_a = np.empty(max_iters + 1)
    scratch_a = np.zeros((9, max(n, 1)))
    cdef double[::1] x = x_a
    cdef double[::1] trace = trace_a
    cdef double[:, ::1] s = scratch_a
    cdef double* y = &s[0, 0]
    cdef double* xp = &s[1, 0]
    cdef double* z = &s[2, 0]
    cdef double* Gx = &s[3, 0]
    cdef double* Gy = &s[4, 0]
    cdef double* Gz = &s[5, 0]
    cdef double* grad = &s[6, 0]
    cdef double* u = &s[7, 0]
    cdef double* r = &s[8, 0]
    cdef const cnp.int64_t* gip = &gi[0] if gi.shape[0] > 0 else NULL
    cdef const cnp.int64_t* gpp = &gp[0] if gp.shape[0] > 0 else NULL
    cdef const double* wp = &ww[0] if ww.shape[0] > 0 else NULL
    cdef const double* Gp = &GG[0, 0] if n > 0 else NULL
    cdef const double* cp = &cc[0] if n > 0 else NULL
    cdef double* xptr = &x[0] if n > 0 else NULL

    cdef Workspace ws
    cdef double eta = step0, Fx, Rx, Rz, dF, dzy, lin, quad, res, xn, tk = 1.0, t_next, a1, a2
    cdef Py_ssize_t it = 0, i
    cdef int status = 0
    cdef bint converged = False, descended

    if n == 0:
        trace_a[0] = yy
        return x_a, 0, yy, 0.0, True, trace_a[:1].copy(), 0, eta
    if _ws_alloc(&ws, n) != 0:
        _ws_free(&ws)
        raise MemoryError()

    with nogil:
        _matvec(Gp, xptr, Gx, n)
        Rx = _value(xptr, kind, gip, gpp, ngroups, alpha, wp, n, &ws)
        Fx = _smooth(cp, yy, xptr, Gx, n) + lam * Rx
        trace[0] = Fx
        res = INFINITY
        if not isfinite(Fx):
            status = 1
        else:
            # residual at the starting point
            for i in range(n):
                u[i] = xptr[i] - eta * (Gx[i] - cp[i])
            _prox(u, eta * lam, kind, gip, gpp, ngroups, alpha, wp, r, n, &ws)
            res = 0.0
            for i in range(n):
                res += (xptr[i] - r[i]) * (xptr[i] - r[i])
            res = sqrt(res)
            xn = sqrt(_dot(xptr, xptr, n))
            if res <= tol * (xn if xn > 1.0 else 1.0):
                converged = True
        if status == 0 and not converged:
            for i in range(n):
                y[i] = xptr[i]
                xp[i] = xptr[i]
            while it < max_iters:
                it += 1
                _matvec(Gp, y, Gy, n)
                for i in range(n):
                    grad[i] = Gy[i] - cp[i]
                while True:
                    for i in range(n):
                        u[i] = y[i] - eta * grad[i]
                    _prox(u, eta * lam, kind, gip, gpp, ngroups, alpha, wp, z, n, &ws)
                    _matvec(Gp, z, Gz, n)
                    dzy = _smooth_diff(cp, z, Gz, y, Gy, n)
                    lin = 0.0
                    quad = 0.0
                    for i in range(n):
                        lin += grad[i] * (z[i] - y[i])
                        quad += (z[i] - y[i]) * (z[i] - y[i])
                    quad /= 2.0 * eta
                    if not isfinite(dzy) or dzy <= lin + quad + 1e-12 * (fabs(lin) + quad):
                        break
                    eta *= backtrack
                    if eta < 1e-300:
                        status = 2
                        break
                if status != 0:
                    break
                Rz = _value(z, kind, gip, gpp, ngroups, alpha, wp, n, &ws)
                dF = _smooth_diff(cp, z, Gz, xptr, Gx, n) + lam * (Rz - Rx)
                if not isfinite(dF):
                    status = 1
                    break
                for i in range(n):
                    xp[i] = xptr[i]
                descended = dF <= 0.0
                if descended:
                    for i in range(n):
                        xptr[i] = z[i]
                        Gx[i] = Gz[i]
                    Rx = Rz
                    Fx = Fx + dF
                t_next = 0.5 * (1.0 + sqrt(1.0 + 4.0 * tk * tk))
                if restart and not descended:
                    tk = 1.0
                    for i in range(n):
                        y[i] = xptr[i]
                else:
                    a1 = tk / t_next
                    a2 = (tk - 1.0) / t_next
                    for i in range(n):
                        y[i] = xptr[i] + a1 * (z[i] - xptr[i]) + a2 * (xptr[i] - xp[i])
                    tk = t_next
                trace[it] = Fx
                for i in range(n):
                    u[i] = xptr[i] - eta * (Gx[i] - cp[i])
                _prox(u, eta * lam, kind, gip, gpp, ngroups, alpha, wp, r, n, &ws)
                res = 0.0
                for i in range(n):
                    res += (xptr[i] - r[i]) * (xptr[i] - r[i])
                res = sqrt(res)
                xn = sqrt(_dot(xptr, xptr, n))
                if res <= tol * (xn if xn > 1.0 else 1.0):
                    converged = True
                    break
        Fx = _smooth(cp, yy, xptr, Gx, n) + lam * Rx
    _ws_free(&ws)
    return x_a, it, Fx, res, bool(converged), trace_a[:it + 1].copy(), status, eta
