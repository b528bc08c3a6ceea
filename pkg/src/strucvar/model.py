"""VAR(d) models: companion form, stability, simulation and lagged regression."""
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class ModelError(ValueError):
    """Invalid model parameters or data shapes."""


class UnstableModelError(ModelError):
    """The companion matrix has spectral radius >= 1."""


class ComputationError(RuntimeError):
    """A numerical routine (eigenvalues, Cholesky, ...) failed."""


@dataclass(frozen=True)
class VarModel:
    """Order-``d`` VAR with coefficient matrices ``A_1..A_d`` and noise covariance."""

    coeffs: tuple
    sigma: np.ndarray

    def __init__(self, coeffs: Sequence[np.ndarray], sigma: Optional[np.ndarray] = None):
        mats = tuple(np.array(a, dtype=np.float64, ndmin=2) for a in coeffs)
        if len(mats) == 0:
            raise ModelError("a VAR model needs at least one lag matrix")
        p = mats[0].shape[0]
        for k, a in enumerate(mats, 1):
            if a.shape != (p, p):
                raise ModelError(f"A_{k} has shape {a.shape}, expected {(p, p)}")
            if not np.all(np.isfinite(a)):
                raise ModelError(f"A_{k} has non-finite entries")
        sig = np.eye(p) if sigma is None else np.array(sigma, dtype=np.float64, ndmin=2)
        if sig.shape != (p, p):
            raise ModelError(f"sigma has shape {sig.shape}, expected {(p, p)}")
        if not np.all(np.isfinite(sig)):
            raise ModelError("sigma has non-finite entries")
        if not np.allclose(sig, sig.T, rtol=0, atol=1e-12 * max(1.0, np.abs(sig).max())):
            raise ModelError("sigma must be symmetric")
        try:
            np.linalg.cholesky(sig)
        except np.linalg.LinAlgError as exc:
            raise ModelError("sigma must be positive definite") from exc
        for a in mats:
            a.setflags(write=False)
        sig.setflags(write=False)
        object.__setattr__(self, "coeffs", mats)
        object.__setattr__(self, "sigma", sig)

    @property
    def d(self) -> int:
        return len(self.coeffs)

    @property
    def p(self) -> int:
        return self.coeffs[0].shape[0]

    def stacked(self) -> np.ndarray:
        """``B = [A_1^T; ...; A_d^T]`` of shape ``(d*p, p)``, the regression-form truth."""
        return np.vstack([a.T for a in self.coeffs])

    @classmethod
    def from_stacked(cls, b: np.ndarray, sigma: Optional[np.ndarray] = None) -> "VarModel":
        b = np.asarray(b, dtype=np.float64)
        dp, p = b.shape
        if dp % p:
            raise ModelError(f"stacked matrix rows {dp} not a multiple of p={p}")
        return cls([b[k * p:(k + 1) * p].T for k in range(dp // p)], sigma)

    def with_coeffs(self, coeffs) -> "VarModel":
        return VarModel(coeffs, self.sigma)


@dataclass
class Trajectory:
    samples: np.ndarray
    seed: Optional[int] = None
    burn_in: int = 0
    noise: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def T(self) -> int:
        return self.samples.shape[0] - 1


@dataclass
class RegressionData:
    x_mat: np.ndarray
    y_mat: np.ndarray

    @property
    def n(self) -> int:
        return self.x_mat.shape[0]

    @property
    def p(self) -> int:
        return self.y_mat.shape[1]

    @property
    def dp(self) -> int:
        return self.x_mat.shape[1]

    def subset(self, rows) -> "RegressionData":
        return RegressionData(self.x_mat[rows], self.y_mat[rows])


def build_companion(model: VarModel) -> np.ndarray:
    d, p = model.d, model.p
    if d == 1:
        return np.array(model.coeffs[0])
    comp = np.zeros((d * p, d * p))
    comp[:p, :] = np.hstack(model.coeffs)
    comp[p:, :-p] = np.eye((d - 1) * p)
    return comp


def _radius_of(coeffs) -> float:
    d = len(coeffs)
    p = coeffs[0].shape[0]
    if d == 1:
        comp = coeffs[0]
    else:
        comp = np.zeros((d * p, d * p))
        comp[:p, :] = np.hstack(coeffs)
        comp[p:, :-p] = np.eye((d - 1) * p)
    try:
        eig = np.linalg.eigvals(comp)
    except np.linalg.LinAlgError as exc:
        raise ComputationError("eigenvalue iteration failed on the companion matrix") from exc
    return float(np.max(np.abs(eig))) if eig.size else 0.0


def spectral_radius(model: VarModel) -> float:
    return _radius_of(model.coeffs)


def is_stable(model: VarModel, margin: float = 1.0):
    """Return ``(stable, spectral_radius)``; stable means radius < margin."""
    if not 0.0 < margin <= 1.0:
        raise ValueError("margin must lie in (0, 1]")
    rho = spectral_radius(model)
    return rho < margin, rho


def rescale_to_radius(coeffs, target_radius: float, tol: float = 1e-10):
    """Scale all lag matrices by one factor so the companion radius hits the target.

    Returns ``(coeffs, rescaled)``; ``rescaled`` is False when the coefficients
    have zero spectral radius and nothing can be done.

    For ``d = 1`` the radius is exactly linear in the factor. For ``d > 1`` it is
    not, so the factor is found by bisection on the recomputed radius.
    """
    if not 0.0 < target_radius < 1.0:
        raise ValueError("target_radius must lie in (0, 1)")
    mats = [np.array(a, dtype=np.float64, ndmin=2) for a in coeffs]
    rho0 = _radius_of(mats)
    if rho0 <= 1e-14:
        return mats, False
    if len(mats) == 1:
        return [mats[0] * (target_radius / rho0)], True

    def radius(scale):
        return _radius_of([a * scale for a in mats])

    lo, hi = 0.0, target_radius / rho0
    while radius(hi) < target_radius:
        lo = hi
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if radius(mid) < target_radius:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    scale = 0.5 * (lo + hi)
    return [a * scale for a in mats], True


def simulate(model: VarModel, T: int, burn_in: int = 500, seed=None,
             check_stable: bool = True) -> Trajectory:
    """Draw ``T + 1`` samples ``x_0..x_T`` from a zero initial state.

    The first ``burn_in`` iterates are discarded. Noise is ``L @ z`` with ``L``
    the lower Cholesky factor of sigma and ``z`` standard normal; the retained
    noise draws are kept on the trajectory so ``Y = XB + E`` can be checked.
    """
    if T < 0 or burn_in < 0:
        raise ValueError("T and burn_in must be non-negative")
    if check_stable:
        stable, rho = is_stable(model)
        if not stable:
            raise UnstableModelError(f"model is unstable (spectral radius {rho:.6g})")
    d, p = model.d, model.p
    rng = np.random.default_rng(seed)
    total = burn_in + T + 1
    chol = np.linalg.cholesky(model.sigma)
    noise = rng.standard_normal((total, p)) @ chol.T
    x = np.zeros((total + d, p))
    coeffs = model.coeffs
    for t in range(total):
        acc = noise[t].copy()
        for k in range(d):
            acc += coeffs[k] @ x[t + d - 1 - k]
        x[t + d] = acc
    return Trajectory(samples=x[d + burn_in:], seed=seed, burn_in=burn_in,
                      noise=noise[burn_in:])


def build_regression(traj, d: int) -> RegressionData:
    """Stack ``x_0..x_T`` into ``Y = X B + E`` with ``N = T - d + 1`` rows."""
    samples = traj.samples if isinstance(traj, Trajectory) else np.asarray(traj, dtype=np.float64)
    if samples.ndim != 2:
        raise ModelError("trajectory samples must be a 2-D array")
    if d < 1:
        raise ValueError("lag order d must be >= 1")
    T = samples.shape[0] - 1
    if T < d:
        raise ModelError(f"need at least d+1={d + 1} samples, got {T + 1}")
    n = T - d + 1
    x_mat = np.hstack([samples[d - 1 - k:d - 1 - k + n] for k in range(d)])
    y_mat = samples[d:d + n].copy()
    return RegressionData(x_mat, y_mat)


def regression_noise(traj: Trajectory, d: int) -> np.ndarray:
    """The realised noise rows ``E`` aligned with :func:`build_regression`."""
    if traj.noise is None:
        raise ModelError("trajectory carries no recorded noise")
    return traj.noise[d:]


def write_trajectory_csv(traj, path) -> None:
    samples = traj.samples if isinstance(traj, Trajectory) else np.asarray(traj)
    p = samples.shape[1]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(["t"] + [f"x{j + 1}" for j in range(p)]) + "\n")
        for t, row in enumerate(samples):
            fh.write(",".join([str(t)] + [format(v, ".17g") for v in row]) + "\n")
