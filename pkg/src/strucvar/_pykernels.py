"""Pure numpy implementations of the hot kernels.

Mirrors the API of the compiled ``_kernels`` module exactly. Selected at
import time when the extension is unavailable or ``STRUCVAR_PURE=1``.
"""
import math

import numpy as np

KIND_L1 = 0
KIND_GROUP = 1
KIND_SGL = 2
KIND_OWL = 3
KIND_RIDGE = 4

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_STEP_UNDERFLOW = 2


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _group_shrink(v, t, gidx, gptr):
    out = v.copy()
    for k in range(len(gptr) - 1):
        idx = gidx[gptr[k]:gptr[k + 1]]
        nrm = math.sqrt(float(np.dot(v[idx], v[idx])))
        if nrm <= t:
            out[idx] = 0.0
        else:
            out[idx] = v[idx] * (1.0 - t / nrm)
    return out


def pava_nonincreasing(z):
    """Project ``z`` onto the cone of non-increasing sequences (L2)."""
    n = z.shape[0]
    sums = np.empty(n)
    counts = np.empty(n, dtype=np.int64)
    nb = 0
    for i in range(n):
        sums[nb] = z[i]
        counts[nb] = 1
        nb += 1
        while nb > 1 and sums[nb - 2] / counts[nb - 2] <= sums[nb - 1] / counts[nb - 1]:
            sums[nb - 2] += sums[nb - 1]
            counts[nb - 2] += counts[nb - 1]
            nb -= 1
    return np.repeat(sums[:nb] / counts[:nb], counts[:nb])


def prox_owl(v, t, weights):
    absv = np.abs(v)
    # stable sort on -|v| keeps original index order among ties
    order = np.argsort(-absv, kind="stable")
    fitted = pava_nonincreasing(absv[order] - t * weights)
    np.maximum(fitted, 0.0, out=fitted)
    out = np.empty_like(v)
    out[order] = fitted
    return np.sign(v) * out


def prox(v, t, kind, gidx, gptr, alpha, weights):
    v = np.asarray(v, dtype=np.float64)
    if kind == KIND_L1:
        return soft_threshold(v, t)
    if kind == KIND_GROUP:
        return _group_shrink(v, t, gidx, gptr)
    if kind == KIND_SGL:
        return _group_shrink(soft_threshold(v, t * alpha), t * (1.0 - alpha), gidx, gptr)
    if kind == KIND_OWL:
        return prox_owl(v, t, weights)
    if kind == KIND_RIDGE:
        return v / (1.0 + 2.0 * t)
    raise ValueError(f"unknown penalty kind code {kind}")


def penalty_value(v, kind, gidx, gptr, alpha, weights):
    v = np.asarray(v, dtype=np.float64)
    if kind == KIND_L1:
        return float(np.sum(np.abs(v)))
    if kind == KIND_GROUP or kind == KIND_SGL:
        gl = 0.0
        for k in range(len(gptr) - 1):
            idx = gidx[gptr[k]:gptr[k + 1]]
            gl += math.sqrt(float(np.dot(v[idx], v[idx])))
        if kind == KIND_GROUP:
            return gl
        return alpha * float(np.sum(np.abs(v))) + (1.0 - alpha) * gl
    if kind == KIND_OWL:
        return float(np.dot(weights, np.sort(np.abs(v))[::-1]))
    if kind == KIND_RIDGE:
        return float(np.dot(v, v))
    raise ValueError(f"unknown penalty kind code {kind}")


def fista_gram(G, c, yy, beta0, lam, kind, gidx, gptr, alpha, weights,
               step0, max_iters, tol, backtrack, restart):
    """Monotone accelerated proximal gradient on a Gram-form quadratic.

    Minimises ``yy - c.x + 0.5 x.G.x + lam * R(x)``. Descent and line-search
    tests use objective differences so progress near the optimum is not lost
    to cancellation; ``trace`` accumulates the accepted decrements.

    Returns ``(x, iters, objective, residual, converged, trace, status, step)``.
    """
    G = np.ascontiguousarray(G, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    x = np.array(beta0, dtype=np.float64, copy=True)
    trace = np.empty(max_iters + 1)

    def smooth(z, Gz):
        return yy - float(np.dot(c, z)) + 0.5 * float(np.dot(z, Gz))

    def smooth_diff(z, Gz, w, Gw):
        # f(z) - f(w) without the cancellation of differencing two objectives
        dz = z - w
        return float(np.dot(dz, 0.5 * (Gz + Gw) - c))

    def pen(z):
        return penalty_value(z, kind, gidx, gptr, alpha, weights)

    def residual(z, Gz, eta):
        grad = Gz - c
        r = z - prox(z - eta * grad, eta * lam, kind, gidx, gptr, alpha, weights)
        return math.sqrt(float(np.dot(r, r)))

    eta = step0
    Gx = G @ x
    Rx = pen(x)
    Fx = smooth(x, Gx) + lam * Rx
    trace[0] = Fx
    if not math.isfinite(Fx):
        return x, 0, Fx, math.inf, False, trace[:1], STATUS_NONFINITE, eta
    res = residual(x, Gx, eta)
    if res <= tol * max(1.0, math.sqrt(float(np.dot(x, x)))):
        return x, 0, Fx, res, True, trace[:1], STATUS_OK, eta

    y = x.copy()
    x_prev = x.copy()
    tk = 1.0
    it = 0
    converged = False
    status = STATUS_OK
    while it < max_iters:
        it += 1
        Gy = G @ y
        grad = Gy - c
        while True:
            z = prox(y - eta * grad, eta * lam, kind, gidx, gptr, alpha, weights)
            Gz = G @ z
            dzy = smooth_diff(z, Gz, y, Gy)
            diff = z - y
            lin = float(np.dot(grad, diff))
            quad = float(np.dot(diff, diff)) / (2.0 * eta)
            if not math.isfinite(dzy) or dzy <= lin + quad + 1e-12 * (abs(lin) + quad):
                break
            eta *= backtrack
            if eta < 1e-300:
                status = STATUS_STEP_UNDERFLOW
                break
        if status != STATUS_OK:
            break
        Rz = pen(z)
        dF = smooth_diff(z, Gz, x, Gx) + lam * (Rz - Rx)
        if not math.isfinite(dF):
            status = STATUS_NONFINITE
            break
        x_prev[:] = x
        descended = dF <= 0.0
        if descended:
            x[:] = z
            Gx = Gz
            Rx = Rz
            Fx = Fx + dF
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
        if restart and not descended:
            tk = 1.0
            y[:] = x
        else:
            y = x + (tk / t_next) * (z - x) + ((tk - 1.0) / t_next) * (x - x_prev)
            tk = t_next
        trace[it] = Fx
        res = residual(x, Gx, eta)
        if res <= tol * max(1.0, math.sqrt(float(np.dot(x, x)))):
            converged = True
            break
    obj = smooth(x, Gx) + lam * Rx
    return x, it, obj, res, converged, trace[:it + 1].copy(), status, eta
