"""Row-separable regularised least squares via monotone accelerated prox-gradient.

Each output column ``y_j`` gives an independent problem

    min_beta (1/N) ||y_j - X beta||^2 + lam * R(beta)

solved on the Gram form ``G = (2/N) X^T X``, ``c_j = (2/N) X^T y_j`` so one
iteration costs ``O(dp^2)`` regardless of ``N``.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from ._backend import kernels
from .model import RegressionData
from .penalties import PenaltySpec, UnsupportedOperation, dual_norm

log = logging.getLogger(__name__)

_STEP_EIG_MAX_DIM = 2000


class SolverError(RuntimeError):
    """A row fit diverged; ``partial`` holds whatever rows succeeded."""

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


@dataclass(frozen=True)
class FitConfig:
    lam: float = 0.0
    max_iters: int = 5000
    tol: float = 1e-8
    backtrack_factor: float = 0.5
    init_step: Optional[float] = None
    restart: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.init_step is not None and not self.init_step > 0:
            raise ValueError("init_step must be > 0")


@dataclass
class RowDiagnostics:
    iterations: int
    objective: float
    residual: float
    converged: bool
    step: float
    trace: np.ndarray = field(repr=False)
    error: Optional[str] = None

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.trace) <= 0.0))


@dataclass
class FitResult:
    b_hat: np.ndarray
    per_row: List[RowDiagnostics]
    lam: float
    lam_rel: Optional[float] = None

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.per_row)


class GramProblem:
    """Sufficient statistics of ``(X, Y)`` shared by every row and every lambda."""

    def __init__(self, x_mat: np.ndarray, y_mat: np.ndarray):
        x_mat = np.asarray(x_mat, dtype=np.float64)
        y_mat = np.asarray(y_mat, dtype=np.float64)
        if y_mat.ndim == 1:
            y_mat = y_mat[:, None]
        if x_mat.ndim != 2 or x_mat.shape[0] != y_mat.shape[0]:
            raise ValueError(f"X {x_mat.shape} and Y {y_mat.shape} are not conformable")
        if x_mat.shape[0] == 0:
            raise ValueError("no regression rows")
        n = x_mat.shape[0]
        self.n = n
        self.dp = x_mat.shape[1]
        self.p = y_mat.shape[1]
        self.gram = np.ascontiguousarray((2.0 / n) * (x_mat.T @ x_mat))
        self.cross = np.ascontiguousarray((2.0 / n) * (x_mat.T @ y_mat))
        self.yy = np.einsum("ij,ij->j", y_mat, y_mat) / n
        if self.dp <= _STEP_EIG_MAX_DIM:
            top = float(np.linalg.eigvalsh(self.gram)[-1]) if self.dp else 0.0
            self.lipschitz = top if top > 0 else None
        else:
            self.lipschitz = None

    @classmethod
    def from_data(cls, data: RegressionData) -> "GramProblem":
        return cls(data.x_mat, data.y_mat)

    def default_step(self) -> float:
        return 1.0 / self.lipschitz if self.lipschitz else 1.0


def _solve_row(prob: GramProblem, j: int, spec: PenaltySpec, config: FitConfig,
               beta0: Optional[np.ndarray]):
    if spec.dim != prob.dp:
        raise ValueError(f"penalty dim {spec.dim} does not match design width {prob.dp}")
    start = np.zeros(prob.dp) if beta0 is None else np.asarray(beta0, dtype=np.float64)
    step = config.init_step if config.init_step is not None else prob.default_step()
    x, iters, obj, res, conv, trace, status, eta = kernels.fista_gram(
        prob.gram, prob.cross[:, j], float(prob.yy[j]), start, float(config.lam),
        *spec.kernel_args(), float(step), int(config.max_iters), float(config.tol),
        float(config.backtrack_factor), bool(config.restart))
    diag = RowDiagnostics(iterations=int(iters), objective=float(obj), residual=float(res),
                          converged=bool(conv), step=float(eta), trace=trace)
    if status == kernels.STATUS_NONFINITE:
        diag.error = f"non-finite objective at step size {eta:.3g}"
    elif status == kernels.STATUS_STEP_UNDERFLOW:
        diag.error = f"backtracking underflow (step size {eta:.3g})"
    return x, diag


def fit_row(x_mat, y_col, spec: PenaltySpec, config: FitConfig, beta0=None):
    """Fit one output column; returns ``(beta, RowDiagnostics)``."""
    prob = GramProblem(x_mat, np.asarray(y_col, dtype=np.float64).reshape(-1, 1))
    beta, diag = _solve_row(prob, 0, spec, config, beta0)
    if diag.error:
        raise SolverError(f"row 0: {diag.error}")
    return beta, diag


def fit(data, spec: PenaltySpec, config: FitConfig, beta0=None, threads: int = 1,
        problem: Optional[GramProblem] = None) -> FitResult:
    """Fit all ``p`` rows independently; ``b_hat`` has shape ``(dp, p)``.

    ``threads > 1`` dispatches rows to a thread pool. Each row's state is
    private, so the result is bitwise identical to the serial run.
    """
    prob = problem if problem is not None else GramProblem.from_data(data)
    starts = [None] * prob.p if beta0 is None else [np.asarray(beta0)[:, j] for j in range(prob.p)]

    def run(j):
        return _solve_row(prob, j, spec, config, starts[j])

    if threads > 1 and prob.p > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(prob.p)))
    else:
        results = [run(j) for j in range(prob.p)]
    b_hat = np.column_stack([r[0] for r in results]) if results else np.zeros((prob.dp, 0))
    out = FitResult(b_hat=b_hat, per_row=[r[1] for r in results], lam=float(config.lam))
    failed = [j for j, (_, d) in enumerate(results) if d.error]
    if failed:
        msgs = "; ".join(f"row {j}: {results[j][1].error}" for j in failed)
        raise SolverError(msgs, partial=out)
    return out


def lambda_max(data, spec: PenaltySpec, problem: Optional[GramProblem] = None) -> float:
    """Smallest lambda for which ``B = 0`` is optimal for every row."""
    if not spec.is_norm:
        raise UnsupportedOperation("RidgeSq has no finite zero-solution threshold")
    prob = problem if problem is not None else GramProblem.from_data(data)
    return float(np.max(dual_norm(spec, prob.cross.T))) if prob.p else 0.0


def lambda_grid(l_max: float, count: int = 30, log_spacing_ratio: float = 1e-3) -> np.ndarray:
    """Descending log-spaced grid from ``l_max`` to ``l_max * log_spacing_ratio``."""
    if not l_max > 0:
        raise ValueError("empty grid: l_max must be > 0")
    if count < 2:
        raise ValueError("count must be >= 2")
    if not 0.0 < log_spacing_ratio < 1.0:
        raise ValueError("log_spacing_ratio must lie in (0, 1)")
    return l_max * np.logspace(0.0, np.log10(log_spacing_ratio), count)


def fit_path(data, spec: PenaltySpec, grid, config: FitConfig = FitConfig(), threads: int = 1,
             problem: Optional[GramProblem] = None, l_max: Optional[float] = None) -> List[FitResult]:
    """Warm-started fits along ``grid`` (visited in the order given)."""
    prob = problem if problem is not None else GramProblem.from_data(data)
    path = []
    beta = None
    for lam in grid:
        res = fit(None, spec, replace(config, lam=float(lam)), beta0=beta, threads=threads, problem=prob)
        if l_max:
            res.lam_rel = float(lam) / l_max
        path.append(res)
        beta = res.b_hat
    return path


def prediction_mse(x_mat, y_mat, b_hat) -> float:
    resid = np.asarray(y_mat) - np.asarray(x_mat) @ b_hat
    return float(np.sum(resid ** 2) / resid.size)


def contiguous_folds(n: int, folds: int):
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if n < folds:
        raise ValueError(f"cannot split {n} rows into {folds} folds")
    bounds = np.linspace(0, n, folds + 1).round().astype(int)
    out = [np.arange(bounds[k], bounds[k + 1]) for k in range(folds)]
    if any(len(f) < 1 for f in out):
        raise ValueError("a fold has no rows")
    return out


@dataclass
class CVResult:
    best_lambda: float
    cv_mse: np.ndarray
    fold_mse: np.ndarray
    grid: np.ndarray
    best_index: int


def cross_validate(data: RegressionData, spec: PenaltySpec, grid, folds: int = 5,
                   config: FitConfig = FitConfig(), threads: int = 1) -> CVResult:
    """Time-blocked K-fold CV of one-step-ahead MSE over a lambda grid.

    Folds are contiguous row blocks. Each training set is fitted along the
    grid in descending order with warm starts. Ties go to the larger lambda.
    """
    grid = np.asarray(grid, dtype=np.float64)
    order = np.argsort(-grid, kind="stable")
    fold_idx = contiguous_folds(data.n, folds)
    scores = np.empty((folds, grid.size))
    for k, test in enumerate(fold_idx):
        train = np.setdiff1d(np.arange(data.n), test)
        if train.size == 0:
            raise ValueError("fold leaves no training rows")
        tr = data.subset(train)
        path = fit_path(tr, spec, grid[order], config, threads=threads)
        for pos, res in zip(order, path):
            scores[k, pos] = prediction_mse(data.x_mat[test], data.y_mat[test], res.b_hat)
    mean = scores.mean(axis=0)
    best = None
    for pos in order:  # descending lambda, strict improvement only
        if best is None or mean[pos] < mean[best]:
            best = pos
    return CVResult(best_lambda=float(grid[best]), cv_mse=mean, fold_mse=scores,
                    grid=grid, best_index=int(best))


def sparsity_percent(b_hat, zero_tol: float = 1e-8) -> float:
    b = np.asarray(b_hat)
    if b.size == 0:
        return 0.0
    return 100.0 * float(np.count_nonzero(np.abs(b) > zero_tol)) / b.size
