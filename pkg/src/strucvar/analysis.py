"""Theory-side quantities: Gaussian widths, rate predictions and error/sample bounds."""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .penalties import (
    PenaltyError,
    PenaltyKind,
    PenaltySpec,
    StructureStats,
    UnsupportedOperation,
    compat_constant,
    dual_norm,
    value,
)
from .spectral import SpectralBounds

_CHUNK = 1000


@dataclass
class TheoryReport:
    width_mean: float
    width_stderr: float
    rate: float
    n_min: int
    det_bound: float
    kappa_hat: float
    psi: float
    r_const: float
    c_const: float
    kappa: float
    regime_ok: bool

    def as_items(self):
        return [
            ("width_mean", self.width_mean),
            ("width_stderr", self.width_stderr),
            ("rate", self.rate),
            ("n_min", self.n_min),
            ("kappa_hat", self.kappa_hat),
            ("det_bound", self.det_bound),
        ]


def gaussian_width_mc(spec: PenaltySpec, dim: int, samples: int = 10000, seed=None):
    """Monte Carlo estimate of ``E sup_{R(u) <= 1} <g, u>`` via the dual norm.

    Draws are generated in fixed-size chunks, each from its own spawned seed,
    so the estimate does not depend on how chunks are scheduled.
    """
    if not spec.is_norm:
        raise UnsupportedOperation("RidgeSq is not a norm: Gaussian width undefined")
    if dim != spec.dim:
        raise PenaltyError(f"dim {dim} does not match penalty dim {spec.dim}")
    if samples < 100:
        raise ValueError("samples must be >= 100")
    n_chunks = -(-samples // _CHUNK)
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seqs = root.spawn(n_chunks)
    vals = np.empty(samples)
    for k, ss in enumerate(seqs):
        lo = k * _CHUNK
        hi = min(samples, lo + _CHUNK)
        g = np.random.default_rng(ss).standard_normal((hi - lo, dim))
        vals[lo:hi] = dual_norm(spec, g)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))


def _require(cond, what):
    if not cond:
        raise PenaltyError(f"structure stats missing {what}")


def rate_prediction(spec: PenaltySpec, stats: StructureStats, p: int, d: int, n: int) -> float:
    """Predicted order of the L2 estimation error per row (implicit constant 1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    dp = d * p
    kind = spec.kind
    if kind is PenaltyKind.L1:
        return math.sqrt(stats.s * math.log(dp) / n)
    if kind is PenaltyKind.GROUP_LASSO:
        _require(stats.k_groups >= 1 and stats.m >= 1, "K/m")
        return math.sqrt(stats.s_g * (stats.m + math.log(stats.k_groups)) / n)
    if kind is PenaltyKind.SPARSE_GROUP_LASSO:
        _require(stats.k_groups >= 1 and stats.m >= 1, "K/m")
        a = spec.alpha
        return math.sqrt((a * stats.s + (1 - a) * stats.s_g) * (stats.m + math.log(stats.k_groups)) / n)
    if kind is PenaltyKind.OWL:
        _require(stats.c_bar > 0 and stats.c1 > 0, "OWL weights")
        return (2 * stats.c1 / stats.c_bar) * math.sqrt(stats.s * math.log(dp) / (stats.c_bar * n))
    raise UnsupportedOperation("no rate prediction for RidgeSq")


def theta_width_surrogate(spec: PenaltySpec, stats: StructureStats, p: int, d: int) -> float:
    """Closed-form stand-in for the width of the error cone on the sphere (the rate at N=1)."""
    return rate_prediction(spec, stats, p, d, 1)


def sample_bound(bounds: SpectralBounds, width_theta: float, c_const: float = 1.0) -> int:
    """Smallest integer N with ``sqrt(N) > (2 sqrt(M) + c w) / (sqrt(L) / 2)``."""
    if not bounds.script_l > 0:
        raise ValueError("lower spectral constant must be > 0")
    if width_theta < 0:
        raise ValueError("width must be >= 0")
    rhs = (2.0 * math.sqrt(bounds.script_m) + c_const * width_theta) / (math.sqrt(bounds.script_l) / 2.0)
    n = max(1, int(math.floor(rhs * rhs)) + 1)
    while n > 1 and math.sqrt(n - 1) > rhs:
        n -= 1
    while not math.sqrt(n) > rhs:
        n += 1
    return n


def det_error_bound(lam: float, kappa: float, r_const: float, psi: float) -> float:
    """``((1 + r) / r) * (lam / kappa) * psi``."""
    if not kappa > 0:
        raise ValueError("kappa must be > 0")
    if not r_const > 1:
        raise ValueError("r must be > 1")
    return (1.0 + r_const) / r_const * lam / kappa * psi


def in_error_set(spec: PenaltySpec, truth_rows, delta_rows, r_const: float) -> bool:
    """Row-wise membership ``R(b + D) <= R(b) + R(D) / r`` (with a rounding allowance).

    A row with ``b = 0`` would admit only ``D = 0``; such rows are left
    unrestricted so that white-noise truths still yield usable directions.
    """
    for b, dlt in zip(truth_rows, delta_rows):
        if not np.any(b):
            continue
        lhs = value(spec, b + dlt)
        rhs = value(spec, b) + value(spec, dlt) / r_const
        if lhs > rhs + 1e-12 * max(1.0, abs(rhs)):
            return False
    return True


def empirical_re_constant(data, spec: PenaltySpec, truth, trials: int = 50, r_const: float = 2.0,
                          lambdas=None, seed=None, config=None) -> float:
    """Empirical restricted-eigenvalue estimate ``min ||Z D||^2 / (N ||D||^2)``.

    Directions ``D`` come from solver errors ``B_hat - B_true`` along a lambda
    path plus random perturbations; only members of the error set are used.
    The minimum over sampled directions upper-bounds the true infimum over the
    cone.
    """
    from .solver import FitConfig, GramProblem, fit_path, lambda_grid, lambda_max

    if not spec.is_norm:
        raise UnsupportedOperation("RidgeSq has no error set")
    rng = np.random.default_rng(seed)
    truth = np.asarray(truth, dtype=np.float64)  # (dp, p) stacked layout
    prob = GramProblem.from_data(data)
    if lambdas is None:
        lmax = lambda_max(data, spec, prob)
        lambdas = lambda_grid(lmax, 8, 1e-2) if lmax > 0 else np.array([1e-3])
    path = fit_path(data, spec, lambdas, config or FitConfig(), problem=prob)
    x_mat = data.x_mat
    n = data.n

    def ratio(delta):
        nrm2 = float(np.sum(delta ** 2))
        return float(np.sum((x_mat @ delta) ** 2)) / (n * nrm2)

    truth_rows = truth.T
    best = math.inf
    found = 0
    bases = [res.b_hat - truth for res in path if np.any(res.b_hat != truth)]
    for base in bases:
        if in_error_set(spec, truth_rows, base.T, r_const):
            best = min(best, ratio(base))
            found += 1
    for _ in range(trials):
        if not bases:
            break
        base = bases[rng.integers(len(bases))]
        scale = rng.uniform(0.05, 0.5) * np.linalg.norm(base) / math.sqrt(base.size)
        cand = rng.uniform(0.1, 1.0) * (base + scale * rng.standard_normal(base.shape))
        if not np.any(cand):
            continue
        if in_error_set(spec, truth_rows, cand.T, r_const):
            best = min(best, ratio(cand))
            found += 1
    if not found:
        raise ValueError("no sampled direction lies in the error set")
    return best


def theory_report(spec: PenaltySpec, stats: StructureStats, bounds: SpectralBounds, p: int, d: int,
                  n: int, lam: float, width_samples: int = 10000, seed=None, c_const: float = 1.0,
                  r_const: float = 2.0, kappa: Optional[float] = None,
                  kappa_hat: float = float("nan")) -> TheoryReport:
    """Bundle the width estimate, rate, sample-size bound and deterministic bound.

    ``kappa`` defaults to the lower spectral constant ``L`` which is the
    population restricted-eigenvalue level (up to the factor 2 of the loss).
    """
    w_mean, w_se = gaussian_width_mc(spec, d * p, width_samples, seed)
    rate = rate_prediction(spec, stats, p, d, n)
    width_theta = theta_width_surrogate(spec, stats, p, d)
    n_min = sample_bound(bounds, width_theta, c_const)
    kap = bounds.script_l if kappa is None else kappa
    psi = compat_constant(spec, stats)
    det = det_error_bound(lam, kap, r_const, psi)
    # first term dominates once N >= w^(2/3)
    regime_ok = n >= w_mean ** (2.0 / 3.0)
    return TheoryReport(width_mean=w_mean, width_stderr=w_se, rate=rate, n_min=n_min, det_bound=det,
                        kappa_hat=kappa_hat, psi=psi, r_const=r_const, c_const=c_const, kappa=kap,
                        regime_ok=regime_ok)
