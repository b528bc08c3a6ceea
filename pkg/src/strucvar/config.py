"""Plain-text ``key = value`` run configuration validated against a fixed schema.

Keys are dotted (``penalty.kind``); a ``[section]`` line prefixes the keys
that follow it. Values are Python literals (numbers, strings, lists, booleans);
anything that is not a literal is taken as a bare string. ``#`` starts a
comment. Unknown keys and ill-typed values are rejected before any work starts.
"""
import ast
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional

import numpy as np

from .penalties import PenaltyError, PenaltySpec, contiguous_groups, linear_owl_weights, parse_kind


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Key:
    check: Callable[[Any], Any]
    default: Any
    doc: str


def _int(lo=None):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
            raise ConfigError("expected an integer")
        if lo is not None and v < lo:
            raise ConfigError(f"must be >= {lo}")
        return int(v)
    return check


def _float(lo=None, hi=None, open_lo=False):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError("expected a number")
        v = float(v)
        if lo is not None and (v < lo or (open_lo and v == lo)):
            raise ConfigError(f"must be {'>' if open_lo else '>='} {lo}")
        if hi is not None and v > hi:
            raise ConfigError(f"must be <= {hi}")
        return v
    return check


def _bool(v):
    if not isinstance(v, bool):
        raise ConfigError("expected True or False")
    return v


def _int_list(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, (list, tuple)) or not v:
        raise ConfigError("expected a non-empty list of integers")
    out = []
    for x in v:
        if isinstance(x, bool) or not isinstance(x, int) or x < 1:
            raise ConfigError("list entries must be positive integers")
        out.append(int(x))
    return out


def _kind(v):
    try:
        return parse_kind(v)
    except PenaltyError as exc:
        raise ConfigError(str(exc)) from None


def _owl_weights(v):
    if isinstance(v, tuple) and len(v) == 3 and v[0] == "linear":
        v = f"linear:{v[1]}:{v[2]}"
    if isinstance(v, str):
        parts = v.split(":")
        if len(parts) != 3 or parts[0] != "linear":
            raise ConfigError("expected a list or 'linear:<hi>:<lo>'")
        try:
            hi, lo = float(parts[1]), float(parts[2])
        except ValueError:
            raise ConfigError("linear generator bounds must be numbers") from None
        if not hi > 0 or lo < 0 or lo > hi:
            raise ConfigError("linear generator needs hi > 0 and 0 <= lo <= hi")
        return ("linear", hi, lo)
    if isinstance(v, (list, tuple)) and v and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        return [float(x) for x in v]
    raise ConfigError("expected a list of numbers or 'linear:<hi>:<lo>'")


def _opt(check):
    def wrapped(v):
        return None if v is None else check(v)
    return wrapped


SCHEMA: Dict[str, Key] = {
    "penalty.kind": Key(_kind, "L1", "L1 | GroupLasso | SparseGroupLasso | Owl | RidgeSq"),
    "penalty.alpha": Key(_float(0.0, 1.0), 0.5, "sparse-group mixing weight in [0, 1]"),
    "penalty.groups": Key(_opt(_int_list), None, "contiguous group sizes summing to d*p"),
    "penalty.owl_weights": Key(_owl_weights, "linear:1:0", "explicit list or linear:<hi>:<lo>"),
    "fit.lambda": Key(_float(0.0), 0.0, "regularisation strength for a single fit"),
    "fit.max_iters": Key(_int(1), 5000, "iteration cap per row"),
    "fit.tol": Key(_float(0.0, open_lo=True), 1e-8, "prox-gradient residual tolerance"),
    "fit.backtrack": Key(_float(0.0, 1.0, open_lo=True), 0.5, "step shrink factor in (0, 1)"),
    "fit.restart": Key(_bool, True, "function-value restart of the momentum"),
    "data.order": Key(_int(1), 1, "lag order d"),
    "data.standardize": Key(_bool, False, "standardise columns before fitting"),
    "cv.folds": Key(_int(2), 5, "contiguous time folds"),
    "cv.grid_size": Key(_int(2), 30, "lambda grid points"),
    "cv.ratio": Key(_float(0.0, 1.0, open_lo=True), 1e-3, "smallest/largest lambda"),
    "simulate.p": Key(_int(1), 10, "number of series"),
    "simulate.T": Key(_int(1), 500, "samples to keep after burn-in (writes T+1 rows)"),
    "simulate.s": Key(_int(1), 4, "nonzeros per row of the planted model"),
    "simulate.radius": Key(_float(0.0, 1.0, open_lo=True), 0.9, "companion spectral radius"),
    "simulate.burn_in": Key(_int(0), 500, "discarded initial iterates"),
    "spectral.grid_points": Key(_int(64), 512, "frequency grid before refinement"),
    "theory.n": Key(_int(1), 500, "sample size for rate and kappa_hat"),
    "theory.width_samples": Key(_int(100), 10000, "Monte Carlo draws for the Gaussian width"),
    "theory.c_const": Key(_float(0.0), 1.0, "width constant in the sample bound"),
    "theory.r_const": Key(_float(1.0, open_lo=True), 2.0, "error-set constant r > 1"),
    "theory.re_trials": Key(_int(1), 50, "random directions for kappa_hat"),
    "scaling.kind": Key(_kind, "L1", "penalty for the sweep"),
    "scaling.p_list": Key(_int_list, [10, 20, 40], "dimensions"),
    "scaling.n_list": Key(_int_list, [50, 100, 200, 400, 800], "sample sizes"),
    "scaling.d": Key(_int(1), 1, "lag order"),
    "scaling.s": Key(_int(1), 4, "nonzeros per row (L1, OWL)"),
    "scaling.k_groups": Key(_opt(_int(1)), None, "number of groups K (GL, SGL)"),
    "scaling.group_size": Key(_opt(_int(1)), None, "group size m, alternative to K"),
    "scaling.s_g": Key(_int(1), 2, "active groups per row"),
    "scaling.alpha": Key(_float(0.0, 1.0), 0.5, "SGL mixing weight"),
    "scaling.owl_hi": Key(_float(0.0, open_lo=True), 1.0, "largest OWL weight"),
    "scaling.owl_lo": Key(_float(0.0), 0.0, "smallest OWL weight"),
    "scaling.runs": Key(_int(1), 50, "repetitions per (p, N)"),
    "scaling.grid_size": Key(_int(2), 50, "lambda grid points"),
    "scaling.ratio": Key(_float(0.0, 1.0, open_lo=True), 1e-3, "smallest/largest lambda"),
    "scaling.radius": Key(_float(0.0, 1.0, open_lo=True), 0.9, "companion spectral radius"),
    "scaling.burn_in": Key(_int(0), 500, "discarded initial iterates"),
    "eval.penalties": Key(lambda v: [_kind(x) for x in (v if isinstance(v, (list, tuple)) else [v])],
                          ["L1", "RidgeSq"], "penalties compared by eval-real"),
}


def _parse_value(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_text(text: str, source: str = "<config>") -> Dict[str, Any]:
    raw: Dict[str, Any] = {}
    section = ""
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("[") and body.endswith("]"):
            section = body[1:-1].strip()
            if not section:
                raise ConfigError(f"{source}:{lineno}: empty section name")
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in body.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: missing key")
        full = f"{section}.{key}" if section and "." not in key else key
        if full not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {full!r}")
        if full in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {full!r}")
        try:
            raw[full] = SCHEMA[full].check(_parse_value(val))
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {full}: {exc}") from None
    return raw


class RunConfig:
    """Validated values layered over schema defaults."""

    def __init__(self, values: Optional[Dict[str, Any]] = None):
        self._given = {}
        for key, val in (values or {}).items():
            self.set(key, val)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
        return cls(parse_text(text, str(path)))

    def get(self, key: str):
        if key not in SCHEMA:
            raise KeyError(key)
        if key in self._given:
            return self._given[key]
        default = SCHEMA[key].default
        return SCHEMA[key].check(default) if default is not None else None

    def given(self, key: str) -> bool:
        return key in self._given

    def set(self, key: str, value) -> None:
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        try:
            self._given[key] = SCHEMA[key].check(value)
        except ConfigError as exc:
            raise ConfigError(f"{key}: {exc}") from None


def build_penalty(cfg: RunConfig, dim: int, kind=None) -> PenaltySpec:
    """Penalty for rows of length ``dim`` from the ``penalty.*`` keys."""
    kind = parse_kind(kind) if kind is not None else cfg.get("penalty.kind")
    try:
        if kind.value == "L1":
            return PenaltySpec.l1(dim)
        if kind.value == "RidgeSq":
            return PenaltySpec.ridge(dim)
        if kind.value == "Owl":
            w = cfg.get("penalty.owl_weights")
            weights = linear_owl_weights(dim, w[1], w[2]) if isinstance(w, tuple) else np.asarray(w)
            return PenaltySpec.owl(weights)
        sizes = cfg.get("penalty.groups")
        if sizes is None:
            raise ConfigError(f"{kind.value} needs penalty.groups")
        if sum(sizes) != dim:
            raise ConfigError(f"penalty.groups sum to {sum(sizes)}, expected d*p = {dim}")
        groups = contiguous_groups(sizes)
        if kind.value == "GroupLasso":
            return PenaltySpec.group_lasso(groups, dim)
        return PenaltySpec.sparse_group_lasso(groups, cfg.get("penalty.alpha"), dim)
    except PenaltyError as exc:
        raise ConfigError(str(exc)) from None


def describe_schema() -> str:
    width = max(len(k) for k in SCHEMA)
    return "\n".join(f"  {k.ljust(width)}  {v.doc} (default {v.default!r})" for k, v in SCHEMA.items())
