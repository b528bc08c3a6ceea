"""Brute-force reference computations that share no code with the package kernels."""
import itertools

import numpy as np


def norm_value(kind, u, groups=None, alpha=0.5, weights=None):
    """Direct norm formulas, vectorised over the leading axes of ``u``."""
    u = np.asarray(u, dtype=np.float64)
    a = np.abs(u)
    if kind == "L1":
        return a.sum(axis=-1)
    if kind in ("GL", "SGL"):
        gl = sum(np.sqrt((u[..., list(g)] ** 2).sum(axis=-1)) for g in groups)
        return gl if kind == "GL" else alpha * a.sum(axis=-1) + (1 - alpha) * gl
    if kind == "OWL":
        srt = -np.sort(-a, axis=-1)
        return srt @ np.asarray(weights, dtype=np.float64)
    raise ValueError(kind)


def grid_prox(kind, v, t, final_step=1e-3, **kw):
    """Minimise ``0.5 |u - v|^2 + t R(u)`` by successively refined grid search.

    A coarse box grid covering ``[-|v|_inf - 1, |v|_inf + 1]^n`` is searched
    first; each refinement re-centres a 21-point-per-axis window on the
    current minimiser and halves the spacing until it reaches ``final_step``.
    Strong convexity of the objective makes the refinement reliable.
    """
    v = np.asarray(v, dtype=np.float64)
    n = v.size
    half = float(np.abs(v).max()) + 1.0

    def obj(points):
        return 0.5 * ((points - v) ** 2).sum(axis=-1) + t * norm_value(kind, points, **kw)

    axes = [np.linspace(-half, half, 41)] * n
    step = axes[0][1] - axes[0][0]
    pts = np.array(list(itertools.product(*axes)))
    best = pts[np.argmin(obj(pts))]
    while step > final_step:
        step = max(step / 4.0, final_step)
        offs = np.arange(-10, 11) * step
        pts = best + np.array(list(itertools.product(*([offs] * n))))
        best = pts[np.argmin(obj(pts))]
    return best


def search_dual(kind, v, samples=1_000_000, seed=0, refine_rounds=200, **kw):
    """Lower bound on ``sup_{R(u) <= 1} <v, u>`` from random boundary points.

    Directions are drawn from a mixture of Gaussian and sparse Gaussian
    vectors (so faces and vertices of polyhedral balls are hit), scaled to
    ``R(u) = 1``; the best candidates are then polished by shrinking random
    perturbations, keeping only improvements.
    """
    v = np.asarray(v, dtype=np.float64)
    n = v.size
    rng = np.random.default_rng(seed)
    best_val, best_u = -np.inf, None
    chunk = 100_000
    for start in range(0, samples, chunk):
        m = min(chunk, samples - start)
        u = rng.standard_normal((m, n))
        mask = rng.random((m, n)) < 0.5
        u[: m // 2] *= mask[: m // 2]
        r = norm_value(kind, u, **kw)
        keep = r > 0
        u = u[keep] / r[keep, None]
        vals = u @ v
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_u = float(vals[i]), u[i]
    scale = 0.1
    for _ in range(refine_rounds):
        cand = best_u + scale * rng.standard_normal((256, n))
        r = norm_value(kind, cand, **kw)
        cand = cand[r > 0] / r[r > 0, None]
        vals = cand @ v
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_u = float(vals[i]), cand[i]
        else:
            scale *= 0.8
    return best_val
