"""Row-wise regularisers: L1, group lasso, sparse group lasso, OWL and squared ridge.

Each penalty acts on one row ``beta_j`` of length ``dp``; the full penalty is
the sum over the ``p`` rows.
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from ._backend import kernels


class PenaltyKind(str, Enum):
    L1 = "L1"
    GROUP_LASSO = "GroupLasso"
    SPARSE_GROUP_LASSO = "SparseGroupLasso"
    OWL = "Owl"
    RIDGE_SQ = "RidgeSq"


_KIND_CODE = {
    PenaltyKind.L1: 0,
    PenaltyKind.GROUP_LASSO: 1,
    PenaltyKind.SPARSE_GROUP_LASSO: 2,
    PenaltyKind.OWL: 3,
    PenaltyKind.RIDGE_SQ: 4,
}

_ALIASES = {
    "l1": PenaltyKind.L1, "lasso": PenaltyKind.L1,
    "grouplasso": PenaltyKind.GROUP_LASSO, "gl": PenaltyKind.GROUP_LASSO, "group": PenaltyKind.GROUP_LASSO,
    "sparsegrouplasso": PenaltyKind.SPARSE_GROUP_LASSO, "sgl": PenaltyKind.SPARSE_GROUP_LASSO,
    "owl": PenaltyKind.OWL, "slope": PenaltyKind.OWL,
    "ridgesq": PenaltyKind.RIDGE_SQ, "ridge": PenaltyKind.RIDGE_SQ,
}


class PenaltyError(ValueError):
    pass


class UnsupportedOperation(PenaltyError):
    """Raised for dual-norm style operations on the non-norm ridge penalty."""


def parse_kind(kind) -> PenaltyKind:
    if isinstance(kind, PenaltyKind):
        return kind
    key = str(kind).replace("_", "").replace("-", "").lower()
    try:
        return _ALIASES[key]
    except KeyError:
        raise PenaltyError(f"unknown penalty kind {kind!r}") from None


@dataclass(frozen=True)
class PenaltySpec:
    """Immutable description of a row penalty on vectors of length ``dim``."""

    kind: PenaltyKind
    dim: int
    groups: Optional[tuple] = None
    alpha: float = 0.5
    weights: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", parse_kind(self.kind))
        if self.dim < 1:
            raise PenaltyError("dim must be >= 1")
        if self.kind in (PenaltyKind.GROUP_LASSO, PenaltyKind.SPARSE_GROUP_LASSO):
            if self.groups is None:
                raise PenaltyError(f"{self.kind.value} needs groups")
            groups = tuple(tuple(int(i) for i in g) for g in self.groups)
            if any(len(g) == 0 for g in groups):
                raise PenaltyError("groups must be non-empty")
            flat = sorted(i for g in groups for i in g)
            if flat != list(range(self.dim)):
                raise PenaltyError("groups must partition 0..dim-1, each index exactly once")
            object.__setattr__(self, "groups", groups)
        if self.kind is PenaltyKind.SPARSE_GROUP_LASSO and not 0.0 <= self.alpha <= 1.0:
            raise PenaltyError("alpha must lie in [0, 1]")
        if self.kind is PenaltyKind.OWL:
            if self.weights is None:
                raise PenaltyError("OWL needs weights")
            w = np.array(self.weights, dtype=np.float64)
            if w.shape != (self.dim,):
                raise PenaltyError(f"OWL weights have length {w.size}, expected {self.dim}")
            if np.any(w < 0) or np.any(np.diff(w) > 0) or not w[0] > 0:
                raise PenaltyError("OWL weights must be non-negative, non-increasing, with c_1 > 0")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)
        # kernel encoding: groups as CSR (ordered indices + offsets)
        if self.groups is not None:
            gidx = np.fromiter((i for g in self.groups for i in g), dtype=np.int64)
            gptr = np.cumsum([0] + [len(g) for g in self.groups]).astype(np.int64)
        else:
            gidx = np.empty(0, np.int64)
            gptr = np.empty(0, np.int64)
        object.__setattr__(self, "_gidx", gidx)
        object.__setattr__(self, "_gptr", gptr)
        object.__setattr__(self, "_w", self.weights if self.weights is not None else np.empty(0))

    # constructors -----------------------------------------------------------------
    @classmethod
    def l1(cls, dim):
        return cls(PenaltyKind.L1, dim)

    @classmethod
    def group_lasso(cls, groups, dim=None):
        dim = dim if dim is not None else sum(len(g) for g in groups)
        return cls(PenaltyKind.GROUP_LASSO, dim, groups=groups)

    @classmethod
    def sparse_group_lasso(cls, groups, alpha, dim=None):
        dim = dim if dim is not None else sum(len(g) for g in groups)
        return cls(PenaltyKind.SPARSE_GROUP_LASSO, dim, groups=groups, alpha=alpha)

    @classmethod
    def owl(cls, weights):
        w = np.asarray(weights, dtype=np.float64)
        return cls(PenaltyKind.OWL, w.size, weights=w)

    @classmethod
    def ridge(cls, dim):
        return cls(PenaltyKind.RIDGE_SQ, dim)

    @property
    def is_norm(self) -> bool:
        return self.kind is not PenaltyKind.RIDGE_SQ

    @property
    def code(self) -> int:
        return _KIND_CODE[self.kind]

    @property
    def k_groups(self) -> int:
        return len(self.groups) if self.groups is not None else 0

    @property
    def max_group_size(self) -> int:
        return max(len(g) for g in self.groups) if self.groups is not None else 0

    def kernel_args(self):
        """``(kind_code, gidx, gptr, alpha, weights)`` as consumed by the kernels."""
        return self.code, self._gidx, self._gptr, float(self.alpha), self._w

    def _effective(self) -> "PenaltySpec":
        # SGL with alpha at an end point is exactly L1 or GL
        if self.kind is PenaltyKind.SPARSE_GROUP_LASSO:
            if self.alpha == 1.0:
                return PenaltySpec.l1(self.dim)
            if self.alpha == 0.0:
                return PenaltySpec.group_lasso(self.groups, self.dim)
        return self


def contiguous_groups(sizes: Sequence[int]):
    out, start = [], 0
    for s in sizes:
        out.append(tuple(range(start, start + int(s))))
        start += int(s)
    return tuple(out)


def linear_owl_weights(dim: int, hi: float, lo: float) -> np.ndarray:
    return np.linspace(hi, lo, dim)


def _check_len(spec: PenaltySpec, v: np.ndarray):
    if v.shape[-1] != spec.dim:
        raise PenaltyError(f"vector length {v.shape[-1]} does not match penalty dim {spec.dim}")


def value(spec: PenaltySpec, v) -> float:
    v = np.asarray(v, dtype=np.float64)
    _check_len(spec, v)
    return float(kernels.penalty_value(v, *spec.kernel_args()))


def prox(spec: PenaltySpec, v, t: float) -> np.ndarray:
    """``argmin_u 0.5 ||u - v||^2 + t R(u)``."""
    if not t > 0:
        raise PenaltyError("prox step t must be > 0")
    v = np.asarray(v, dtype=np.float64)
    _check_len(spec, v)
    return kernels.prox(v, float(t), *spec.kernel_args())


def _group_norms(spec, v):
    return np.stack([np.linalg.norm(v[..., list(g)], axis=-1) for g in spec.groups], axis=-1)


def _sgl_dual(spec, v, rtol=1e-10):
    """Smallest ``t`` with ``||soft(v_G, t alpha)||_2 <= t (1 - alpha)`` for every group.

    Vectorised over leading axes of ``v``.
    """
    alpha = spec.alpha
    eps = 1e-12
    absv = np.abs(v)
    hi = np.maximum(absv.max(axis=-1) / max(alpha, eps),
                    _group_norms(spec, v).max(axis=-1) / max(1.0 - alpha, eps))
    lo = np.zeros_like(hi)
    groups = [list(g) for g in spec.groups]

    def feasible(t):
        shr = np.maximum(absv - (t * alpha)[..., None], 0.0)
        ok = np.ones(t.shape, dtype=bool)
        for g in groups:
            ok &= np.sqrt(np.sum(shr[..., g] ** 2, axis=-1)) <= t * (1.0 - alpha)
        return ok

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        ok = feasible(mid)
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
        if np.all(hi - lo <= rtol * np.maximum(hi, 1e-300)):
            break
    return hi


def dual_norm(spec: PenaltySpec, v):
    """``sup_{R(u) <= 1} <v, u>``; vectorised over leading axes."""
    if not spec.is_norm:
        raise UnsupportedOperation("RidgeSq is not a norm: dual norm undefined")
    v = np.asarray(v, dtype=np.float64)
    _check_len(spec, v)
    eff = spec._effective()
    if eff.kind is PenaltyKind.L1:
        out = np.abs(v).max(axis=-1)
    elif eff.kind is PenaltyKind.GROUP_LASSO:
        out = _group_norms(eff, v).max(axis=-1)
    elif eff.kind is PenaltyKind.OWL:
        top = -np.sort(-np.abs(v), axis=-1)
        out = (np.cumsum(top, axis=-1) / np.cumsum(eff.weights)).max(axis=-1)
    else:
        out = _sgl_dual(eff, v)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class StructureStats:
    s: int = 0
    s_g: int = 0
    m: int = 0
    k_groups: int = 0
    c_bar: float = 0.0
    c1: float = 0.0
    alpha: float = 0.5


def structure_stats(spec: PenaltySpec, truth_rows, zero_tol: float = 0.0) -> StructureStats:
    """Sparsity statistics of the true coefficient rows (shape ``(p, dp)``).

    ``s`` and ``s_g`` are maxima over rows.
    """
    rows = np.atleast_2d(np.asarray(truth_rows, dtype=np.float64))
    _check_len(spec, rows)
    nz = np.abs(rows) > zero_tol
    stats = StructureStats(s=int(nz.sum(axis=1).max()) if rows.size else 0, alpha=float(spec.alpha))
    if spec.groups is not None:
        stats.k_groups = spec.k_groups
        stats.m = spec.max_group_size
        active = np.stack([nz[:, list(g)].any(axis=1) for g in spec.groups], axis=1)
        stats.s_g = int(active.sum(axis=1).max())
    if spec.weights is not None:
        stats.c_bar = float(np.mean(spec.weights))
        stats.c1 = float(spec.weights[0])
    return stats


def compat_constant(spec: PenaltySpec, stats: StructureStats) -> float:
    """Upper bound on the norm compatibility constant of the error cone."""
    kind = spec.kind
    if kind is PenaltyKind.L1:
        return 4.0 * math.sqrt(stats.s)
    if kind is PenaltyKind.GROUP_LASSO:
        return 4.0 * math.sqrt(stats.s_g)
    if kind is PenaltyKind.SPARSE_GROUP_LASSO:
        a = spec.alpha
        return 4.0 * (a * math.sqrt(stats.s) + (1.0 - a) * math.sqrt(stats.s_g))
    if kind is PenaltyKind.OWL:
        if stats.c_bar <= 0:
            raise PenaltyError("OWL compatibility constant needs c_bar > 0")
        return 2.0 * stats.c1 ** 2 * math.sqrt(stats.s) / stats.c_bar
    raise UnsupportedOperation("RidgeSq has no compatibility constant")
