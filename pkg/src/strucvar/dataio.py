"""CSV ingestion and emission, plus the train/test evaluation used on real series."""
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .model import build_regression
from .penalties import PenaltyKind, PenaltySpec
from .solver import (
    FitConfig,
    GramProblem,
    cross_validate,
    fit,
    lambda_grid,
    lambda_max,
    prediction_mse,
    sparsity_percent,
)

STD_FLOOR = 1e-12
TRAIN_FRACTION = 0.8


class DataError(ValueError):
    pass


@dataclass
class SeriesFile:
    names: list
    values: np.ndarray
    mean: Optional[np.ndarray] = None
    std: Optional[np.ndarray] = None

    @property
    def standardized(self) -> bool:
        return self.mean is not None


def standardize(values, mean=None, std=None):
    """Column-wise ``(x - mean) / std`` with the std floored at ``1e-12``."""
    values = np.asarray(values, dtype=np.float64)
    mean = values.mean(axis=0) if mean is None else mean
    std = np.maximum(values.std(axis=0), STD_FLOOR) if std is None else std
    return (values - mean) / std, mean, std


def load_csv(path, standardize_cols: bool = False) -> SeriesFile:
    """Read a headed numeric CSV in time order.

    A leading ``t`` column is treated as a time index and dropped when other
    columns follow it (the trajectory format written by ``simulate``).
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    rows = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip()]
    if not rows:
        raise DataError(f"{path}: empty file")
    names = [c.strip() for c in rows[0][1].split(",")]
    width = len(names)
    data = []
    for lineno, ln in rows[1:]:
        cells = ln.split(",")
        if len(cells) != width:
            raise DataError(f"{path}:{lineno}: expected {width} columns, found {len(cells)}")
        try:
            vals = [float(c) for c in cells]
        except ValueError:
            bad = next(c for c in cells if not _is_float(c))
            raise DataError(f"{path}:{lineno}: non-numeric cell {bad.strip()!r}") from None
        if not all(math.isfinite(v) for v in vals):
            raise DataError(f"{path}:{lineno}: non-finite value")
        data.append(vals)
    if len(data) < 2:
        raise DataError(f"{path}: need at least 2 data rows, found {len(data)}")
    values = np.array(data, dtype=np.float64)
    if width > 1 and names[0].lower() == "t":
        names, values = names[1:], values[:, 1:]
    series = SeriesFile(names=names, values=values)
    if standardize_cols:
        series.values, series.mean, series.std = standardize(values)
    return series


def _is_float(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def write_csv(path, header: Sequence[str], rows) -> None:
    """Write rows with floats at 17 significant digits (exact round trip)."""

    def fmt(v):
        if isinstance(v, (bool, np.bool_)):
            return str(int(v))
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return format(float(v), ".17g")
        return str(v)

    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_matrix_csv(path, mat, prefix: str = "x") -> None:
    mat = np.atleast_2d(np.asarray(mat, dtype=np.float64))
    write_csv(path, [f"{prefix}{j + 1}" for j in range(mat.shape[1])], mat.tolist())


def read_matrix_csv(path) -> np.ndarray:
    """Matrix stored by :func:`write_matrix_csv` (a header row is required)."""
    series = load_csv(path)
    return series.values


@dataclass
class EvalResult:
    kind: PenaltyKind
    mse: float
    sparsity: float
    lam: float
    b_hat: np.ndarray
    n_train: int
    n_test: int


def ridge_grid(problem: GramProblem, count: int = 30) -> np.ndarray:
    """Ridge has no zero-solution threshold; span the design's variance scale instead."""
    scale = float(np.trace(problem.gram)) / (2.0 * max(problem.dp, 1))
    if not scale > 0:
        scale = 1.0
    return scale * np.logspace(2.0, -4.0, count)


def split_rows(n: int, frac: float = TRAIN_FRACTION):
    """First ``floor(frac * n)`` regression rows train, the rest test."""
    n_train = int(math.floor(frac * n))
    if n_train < 1 or n_train >= n:
        raise DataError(f"cannot split {n} rows {frac:.0%}/{1 - frac:.0%}")
    return np.arange(n_train), np.arange(n_train, n)


def evaluate_real(series, d: int, spec: PenaltySpec, folds: int = 5, config: FitConfig = FitConfig(),
                  grid_size: int = 30, ratio: float = 1e-3, standardize_cols: bool = True,
                  threads: int = 1) -> EvalResult:
    """Cross-validated fit on the first 80% of rows, one-step MSE on the last 20%.

    Standardisation statistics, lambda_max and CV all use training samples
    only; the held-out rows are touched once, for scoring.
    """
    values = series.values if isinstance(series, SeriesFile) else np.asarray(series, dtype=np.float64)
    T = values.shape[0]
    if T <= d + folds:
        raise DataError(f"series of length {T} too short for d={d} and {folds} folds")
    n = T - d
    train_rows, test_rows = split_rows(n)
    # samples 0..n_train+d-1 are the only ones the training regression sees
    n_seen = train_rows[-1] + d + 1
    if standardize_cols:
        _, mean, std = standardize(values[:n_seen])
        values, _, _ = standardize(values, mean, std)
    data = build_regression(values, d)
    train = data.subset(train_rows)
    if train.n < folds:
        raise DataError(f"{train.n} training rows cannot form {folds} folds")
    prob = GramProblem.from_data(train)
    if spec.is_norm:
        lmax = lambda_max(train, spec, prob)
        if not lmax > 0:
            raise DataError("training targets are identically zero")
        grid = lambda_grid(lmax, grid_size, ratio)
    else:
        grid = ridge_grid(prob, grid_size)
    cv = cross_validate(train, spec, grid, folds, config, threads=threads)
    res = fit(None, spec, replace(config, lam=cv.best_lambda), threads=threads, problem=prob)
    mse = prediction_mse(data.x_mat[test_rows], data.y_mat[test_rows], res.b_hat)
    return EvalResult(kind=spec.kind, mse=mse, sparsity=sparsity_percent(res.b_hat), lam=cv.best_lambda,
                      b_hat=res.b_hat, n_train=train.n, n_test=len(test_rows))
