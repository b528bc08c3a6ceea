"""Synthetic scaling studies: how the best-lambda estimation error decays with N.

A sweep visits every ``(p, N, run)`` cell, plants a structured stable VAR,
simulates ``N + d`` samples, fits a warm-started lambda path and records the
error ``||vec(B_hat) - vec(B_true)||_2`` at every point of a lambda grid
shared by all cells with the same p. Cells are aggregated over runs.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .model import VarModel, build_regression, rescale_to_radius, simulate
from .penalties import (
    PenaltyKind,
    PenaltySpec,
    StructureStats,
    contiguous_groups,
    linear_owl_weights,
    parse_kind,
    structure_stats,
)
from .solver import FitConfig, GramProblem, fit_path, lambda_grid, lambda_max

log = logging.getLogger(__name__)


class ExperimentError(ValueError):
    pass


@dataclass
class ScalingConfig:
    kind: PenaltyKind = PenaltyKind.L1
    p_list: Sequence[int] = (10, 20, 40)
    n_list: Sequence[int] = (50, 100, 200, 400, 800)
    d: int = 1
    s: int = 4
    k_groups: Optional[int] = None
    group_size: Optional[int] = None
    s_g: int = 2
    alpha: float = 0.5
    owl_hi: float = 1.0
    owl_lo: float = 0.0
    runs: int = 50
    first_run: int = 0
    lambda_grid_size: int = 50
    lambda_ratio: float = 1e-3
    target_radius: float = 0.9
    sigma: Optional[np.ndarray] = None
    master_seed: int = 0
    burn_in: int = 500
    fit: FitConfig = field(default_factory=FitConfig)
    threads: int = 1

    def __post_init__(self):
        self.kind = parse_kind(self.kind)
        if self.runs < 1:
            raise ExperimentError("runs must be >= 1")
        if not self.p_list or not self.n_list:
            raise ExperimentError("p_list and n_list must be non-empty")
        if self.kind is PenaltyKind.RIDGE_SQ:
            raise ExperimentError("scaling sweeps need a norm penalty (lambda_max undefined for RidgeSq)")
        for p in self.p_list:
            self.groups_for(p)  # validates divisibility

    def groups_for(self, p: int):
        if self.kind not in (PenaltyKind.GROUP_LASSO, PenaltyKind.SPARSE_GROUP_LASSO):
            return None
        dp = self.d * p
        if self.k_groups is not None:
            if dp % self.k_groups:
                raise ExperimentError(f"dp={dp} not divisible into K={self.k_groups} groups")
            size = dp // self.k_groups
        elif self.group_size is not None:
            if dp % self.group_size:
                raise ExperimentError(f"dp={dp} not divisible by group size {self.group_size}")
            size = self.group_size
        else:
            raise ExperimentError("group penalties need k_groups or group_size")
        return contiguous_groups([size] * (dp // size))

    def penalty_for(self, p: int) -> PenaltySpec:
        dp = self.d * p
        if self.kind is PenaltyKind.L1:
            return PenaltySpec.l1(dp)
        if self.kind is PenaltyKind.OWL:
            return PenaltySpec.owl(linear_owl_weights(dp, self.owl_hi, self.owl_lo))
        groups = self.groups_for(p)
        if self.kind is PenaltyKind.GROUP_LASSO:
            return PenaltySpec.group_lasso(groups, dp)
        return PenaltySpec.sparse_group_lasso(groups, self.alpha, dp)


@dataclass
class ScalingRecord:
    kind: PenaltyKind
    p: int
    d: int
    n: int
    stats: StructureStats
    lam: float
    lam_rel: float
    err_mean: float
    err_std: float
    err_row_mean: float
    err_row_std: float
    is_best: bool = False


@dataclass
class AlignmentReport:
    rescale_label: str
    curves: Dict[int, Tuple[np.ndarray, np.ndarray]]
    grid_x: np.ndarray
    max_pairwise_dev: float
    loglog_slope: Dict[int, float]


@dataclass
class CellFailure:
    p: int
    n: int
    run: int
    message: str


@dataclass
class SolverSummary:
    fits: int = 0
    nonmonotone: int = 0
    unconverged: int = 0
    max_residual_ratio: float = 0.0

    def add(self, other: "SolverSummary"):
        self.fits += other.fits
        self.nonmonotone += other.nonmonotone
        self.unconverged += other.unconverged
        self.max_residual_ratio = max(self.max_residual_ratio, other.max_residual_ratio)


@dataclass
class ScalingResult:
    records: List[ScalingRecord]
    failures: List[CellFailure]
    solver: SolverSummary
    config: ScalingConfig


def plant_rows(kind, p: int, d: int, rng, s: int = 0, groups=None, s_g: int = 0) -> np.ndarray:
    """Return a ``(p, dp)`` matrix whose rows carry the requested sparsity pattern."""
    kind = parse_kind(kind)
    dp = d * p
    rows = np.zeros((p, dp))

    def draw(k):
        return rng.choice([-1.0, 1.0], size=k) * rng.uniform(0.5, 1.0, size=k)

    for i in range(p):
        if kind in (PenaltyKind.L1, PenaltyKind.OWL):
            idx = rng.choice(dp, size=s, replace=False)
            rows[i, idx] = draw(s)
        else:
            chosen = rng.choice(len(groups), size=s_g, replace=False)
            for g in sorted(chosen):
                members = np.array(groups[g])
                vals = draw(len(members))
                if kind is PenaltyKind.SPARSE_GROUP_LASSO and len(members) > 1:
                    vals[rng.choice(len(members), size=len(members) // 2, replace=False)] = 0.0
                rows[i, members] = vals
    return rows


def make_ground_truth(kind, p: int, d: int, target_radius: float = 0.9, seed=None, s: int = 0,
                      groups=None, s_g: int = 0, sigma=None, max_tries: int = 100) -> VarModel:
    """Plant a structured VAR and rescale it to the target companion radius.

    Patterns whose companion matrix is nilpotent (radius 0) cannot be rescaled;
    a fresh pattern is drawn from the same seed stream in that case.
    """
    kind = parse_kind(kind)
    dp = d * p
    if kind in (PenaltyKind.L1, PenaltyKind.OWL):
        if s <= 0:
            raise ExperimentError("s=0 gives the zero model (trivially stable); rejected")
        if s > dp:
            raise ExperimentError(f"s={s} exceeds dp={dp}")
    elif kind in (PenaltyKind.GROUP_LASSO, PenaltyKind.SPARSE_GROUP_LASSO):
        if groups is None or sum(len(g) for g in groups) != dp:
            raise ExperimentError("group sizes must sum to dp")
        if s_g <= 0:
            raise ExperimentError("s_g=0 gives the zero model (trivially stable); rejected")
        if s_g > len(groups):
            raise ExperimentError(f"s_g={s_g} exceeds K={len(groups)}")
    else:
        raise ExperimentError(f"no ground-truth generator for {kind.value}")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        rows = plant_rows(kind, p, d, rng, s=s, groups=groups, s_g=s_g)
        coeffs = [rows[:, k * p:(k + 1) * p] for k in range(d)]
        scaled, ok = rescale_to_radius(coeffs, target_radius)
        if ok:
            return VarModel(scaled, sigma)
    raise ExperimentError("could not draw a pattern with non-zero spectral radius")


def _cell_seed(master_seed: int, p: int, n: int, run: int):
    return np.random.SeedSequence(master_seed, spawn_key=(p, n, run))


def _simulate_cell(cfg: ScalingConfig, p: int, n: int, run: int):
    truth_seq, sim_seq = _cell_seed(cfg.master_seed, p, n, run).spawn(2)
    model = make_ground_truth(cfg.kind, p, cfg.d, cfg.target_radius, truth_seq, s=cfg.s,
                              groups=cfg.groups_for(p), s_g=cfg.s_g, sigma=cfg.sigma)
    traj = simulate(model, n + cfg.d - 1, burn_in=cfg.burn_in, seed=sim_seq)
    data = build_regression(traj, cfg.d)
    return model, data, GramProblem.from_data(data)


def _cell_lambda_max(cfg: ScalingConfig, p: int, n: int, run: int) -> float:
    _, data, prob = _simulate_cell(cfg, p, n, run)
    return lambda_max(data, cfg.penalty_for(p), prob)


def _run_cell(cfg: ScalingConfig, p: int, n: int, run: int, grid: np.ndarray):
    spec = cfg.penalty_for(p)
    model, data, prob = _simulate_cell(cfg, p, n, run)
    lmax = lambda_max(data, spec, prob)
    path = fit_path(data, spec, grid, cfg.fit, problem=prob, l_max=lmax)
    truth = model.stacked()
    errs = np.array([np.linalg.norm(res.b_hat - truth) for res in path])
    summ = SolverSummary()
    for res in path:
        for j, diag in enumerate(res.per_row):
            summ.fits += 1
            summ.nonmonotone += not diag.monotone
            summ.unconverged += not diag.converged
            scale = cfg.fit.tol * max(1.0, float(np.linalg.norm(res.b_hat[:, j])))
            summ.max_residual_ratio = max(summ.max_residual_ratio, diag.residual / scale)
    stats = structure_stats(spec, truth.T)
    return errs, lmax, stats, summ


def _map(cfg: ScalingConfig, fn, jobs):
    def work(job):
        try:
            return job, fn(job), None
        except Exception as exc:  # recorded per cell, sweep continues
            log.warning("cell p=%d N=%d run=%d failed: %s", *job[:3], exc)
            return job, None, str(exc)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            return list(pool.map(work, jobs))
    return [work(j) for j in jobs]


def scaling_grids(cfg: ScalingConfig) -> Dict[int, np.ndarray]:
    """One absolute lambda grid per p shared by all of its N and runs.

    The top is the largest per-N median of the cells' lambda_max (a median,
    because strongly non-normal draws occasionally inflate lambda_max by an
    order of magnitude). Sharing the grid makes every record a genuine
    ``(p, N, lambda)`` cell, so best-lambda values are comparable across N.
    """
    jobs = [(p, n, r) for p in cfg.p_list for n in cfg.n_list
            for r in range(cfg.first_run, cfg.first_run + cfg.runs)]
    lmaxes: Dict[Tuple[int, int], list] = {}
    for (p, n, _), lmax, _ in _map(cfg, lambda j: _cell_lambda_max(cfg, *j), jobs):
        if lmax is not None and lmax > 0:
            lmaxes.setdefault((p, n), []).append(lmax)
    tops: Dict[int, float] = {}
    for (p, _), vals in lmaxes.items():
        tops[p] = max(tops.get(p, 0.0), float(np.median(vals)))
    return {p: lambda_grid(top, cfg.lambda_grid_size, cfg.lambda_ratio) for p, top in tops.items()}


def run_scaling(cfg: ScalingConfig, grids: Optional[Dict[int, np.ndarray]] = None) -> ScalingResult:
    """Sweep every ``(p, N, run)`` cell and aggregate errors per ``(p, N, lambda)``.

    The best lambda of a ``(p, N)`` pair minimises the run-averaged error.
    """
    grids = scaling_grids(cfg) if grids is None else grids
    jobs = [(p, n, r) for p in cfg.p_list if p in grids for n in cfg.n_list
            for r in range(cfg.first_run, cfg.first_run + cfg.runs)]
    outputs = _map(cfg, lambda j: _run_cell(cfg, *j, grids[j[0]]), jobs)
    failures = [CellFailure(p, n, 0, "no cell produced a positive lambda_max")
                for p in cfg.p_list if p not in grids for n in cfg.n_list]

    by_cell: Dict[Tuple[int, int], list] = {}
    solver = SolverSummary()
    for (p, n, r), out, err in outputs:
        if err is not None:
            failures.append(CellFailure(p, n, r, err))
            continue
        by_cell.setdefault((p, n), []).append(out)
        solver.add(out[3])

    records = []
    for p in cfg.p_list:
        for n in cfg.n_list:
            outs = by_cell.get((p, n))
            if not outs:
                continue
            grid = grids[p]
            errs = np.array([o[0] for o in outs])
            mean_lmax = float(np.mean([o[1] for o in outs]))
            ddof = 1 if len(outs) > 1 else 0
            err_mean = errs.mean(axis=0)
            err_std = errs.std(axis=0, ddof=ddof)
            rows = errs / math.sqrt(p)
            best = int(np.argmin(err_mean))
            stats = outs[0][2]
            for k in range(errs.shape[1]):
                records.append(ScalingRecord(
                    kind=cfg.kind, p=p, d=cfg.d, n=n, stats=stats, lam=float(grid[k]),
                    lam_rel=float(grid[k]) / mean_lmax if mean_lmax > 0 else float("nan"),
                    err_mean=float(err_mean[k]), err_std=float(err_std[k]),
                    err_row_mean=float(rows[:, k].mean()), err_row_std=float(rows[:, k].std(ddof=ddof)),
                    is_best=(k == best)))
    return ScalingResult(records=records, failures=failures, solver=solver, config=cfg)


def best_records(records) -> List[ScalingRecord]:
    return [r for r in records if r.is_best]


def rescale_factor(kind, stats: StructureStats, p: int, d: int) -> Tuple[float, str]:
    """Divisor applied to N (times c_bar for OWL) and a label for the axis."""
    kind = parse_kind(kind)
    if kind is PenaltyKind.L1:
        return stats.s * math.log(d * p), "N/(s log(dp))"
    if kind is PenaltyKind.GROUP_LASSO:
        if stats.k_groups < 1 or stats.m < 1:
            raise ExperimentError("group rescaling needs K and m")
        return stats.s_g * (stats.m + math.log(stats.k_groups)), "N/(s_G (m + log K))"
    if kind is PenaltyKind.SPARSE_GROUP_LASSO:
        if stats.k_groups < 1 or stats.m < 1:
            raise ExperimentError("group rescaling needs K and m")
        a = stats.alpha
        return (a * stats.s + (1 - a) * stats.s_g) * (stats.m + math.log(stats.k_groups)), \
            "N/((alpha s + (1-alpha) s_G)(m + log K))"
    if kind is PenaltyKind.OWL:
        if stats.c_bar <= 0:
            raise ExperimentError("OWL rescaling needs c_bar")
        return stats.s * math.log(p) / stats.c_bar, "c_bar N/(s log p)"
    raise ExperimentError(f"no rescaling for {kind.value}")


def rescale_axis(records, kind=None, stats_by_p: Optional[Dict[int, StructureStats]] = None,
                 error: str = "total"):
    """Best-lambda error curves keyed by p with N mapped to the rate-rescaled axis.

    ``error="total"`` uses ``||vec(Delta)||_2``; ``error="row"`` divides it by
    ``sqrt(p)`` (root-mean-square error per output row).
    """
    best = best_records(records)
    if not best:
        raise ExperimentError("no best-lambda records")
    kind = parse_kind(kind or best[0].kind)
    curves, label = {}, ""
    for p in sorted({r.p for r in best}):
        rows = sorted((r for r in best if r.p == p), key=lambda r: r.n)
        stats = (stats_by_p or {}).get(p, rows[0].stats)
        if stats is None:
            raise ExperimentError(f"missing structure stats for p={p}")
        div, label = rescale_factor(kind, stats, p, rows[0].d)
        x = np.array([r.n / div for r in rows])
        y = np.array([r.err_mean if error == "total" else r.err_row_mean for r in rows])
        curves[p] = (x, y)
    return curves, label


def _loglog_interp(x, y, xq):
    return np.exp(np.interp(np.log(xq), np.log(x), np.log(y)))


def alignment_metric(curves: Dict, n_points: int = 20, label: str = "") -> AlignmentReport:
    """Quantify curve collapse on the common rescaled range.

    Each curve is interpolated piecewise-linearly in log-log coordinates onto
    ``n_points`` log-spaced abscissae spanning the overlap; the deviation is
    ``max |y_a - y_b| / min(y_a, y_b)`` over points and pairs. Slopes are least
    squares fits of ``log y`` on ``log x`` over the same abscissae.
    """
    if len(curves) < 2:
        raise ExperimentError("need at least two curves")
    cleaned = {}
    for key, (x, y) in curves.items():
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        order = np.argsort(x)
        x, y = x[order], y[order]
        if np.any(x <= 0) or np.any(y <= 0):
            raise ExperimentError("curves must be strictly positive for log-log alignment")
        cleaned[key] = (x, y)
    lo = max(x[0] for x, _ in cleaned.values())
    hi = min(x[-1] for x, _ in cleaned.values())
    if not lo < hi:
        raise ExperimentError("curves have no overlapping rescaled range")
    grid = np.geomspace(lo, hi, n_points)
    interp = {k: _loglog_interp(x, y, grid) for k, (x, y) in cleaned.items()}
    keys = list(interp)
    dev = 0.0
    for i in range(len(keys)):
        for j in range(i + 1, len(keys)):
            a, b = interp[keys[i]], interp[keys[j]]
            dev = max(dev, float(np.max(np.abs(a - b) / np.minimum(a, b))))
    slopes = {k: float(np.polyfit(np.log(grid), np.log(v), 1)[0]) for k, v in interp.items()}
    return AlignmentReport(rescale_label=label, curves=cleaned, grid_x=grid,
                           max_pairwise_dev=dev, loglog_slope=slopes)


@dataclass
class LambdaTrend:
    fixed_n: int
    corr_sqrt_log_p: float
    slope_sqrt_log_p: float
    slopes_log_n: Dict[int, float]

    @property
    def mean_slope_log_n(self) -> float:
        return float(np.mean(list(self.slopes_log_n.values())))


def lambda_trend(records, fixed_n: Optional[int] = None) -> LambdaTrend:
    """Best-lambda versus ``sqrt(log p)`` (fixed N) and ``log N`` (each fixed p)."""
    best = best_records(records)
    ps = sorted({r.p for r in best})
    ns = sorted({r.n for r in best})
    if len(ps) < 3 or len(ns) < 3:
        raise ExperimentError("lambda trend needs >= 3 values of p and of N")
    fixed_n = ns[-1] if fixed_n is None else fixed_n
    at_n = sorted((r for r in best if r.n == fixed_n), key=lambda r: r.p)
    if len(at_n) < 3:
        raise ExperimentError(f"fewer than 3 p values at N={fixed_n}")
    xs = np.sqrt(np.log([r.d * r.p for r in at_n]))
    lam = np.array([r.lam for r in at_n])
    corr = float(np.corrcoef(xs, lam)[0, 1])
    slope_p = float(np.polyfit(xs, lam, 1)[0])
    slopes = {}
    for p in ps:
        rows = sorted((r for r in best if r.p == p), key=lambda r: r.n)
        if len(rows) >= 3:
            slopes[p] = float(np.polyfit(np.log([r.n for r in rows]), np.log([r.lam for r in rows]), 1)[0])
    return LambdaTrend(fixed_n=fixed_n, corr_sqrt_log_p=corr, slope_sqrt_log_p=slope_p, slopes_log_n=slopes)
