"""Spectral-density conditioning constants and an exact autocovariance oracle.

The lower constant is ``L = lmin(Sigma) / max_w lmax(A(w))`` and the upper one
``M = lmax(Sigma) / min_w lmin(AA(w))`` where ``A(w)`` is built from the lag
polynomial and ``AA(w)`` from the companion matrix. Both extrema are found on
a uniform frequency grid and polished with a golden-section search.
"""
from dataclasses import dataclass

import numpy as np

from .model import UnstableModelError, VarModel, build_companion, is_stable

_GOLDEN = 0.5 * (np.sqrt(5.0) - 1.0)


@dataclass
class SpectralBounds:
    script_l: float
    script_m: float
    lam_max_A: float
    lam_min_boldA: float
    grid_points: int
    omega_max_A: float = float("nan")
    omega_min_boldA: float = float("nan")


@dataclass
class AutocovarianceSet:
    """``gammas[h] = E[x_{t+h} x_t^T]`` and the block-Toeplitz row covariance ``c_x``."""

    gammas: list
    c_x: np.ndarray
    companion_cov: np.ndarray


@dataclass
class BoundReport:
    min_eig_cx: float
    lower_slack: float
    max_eig_qa: float
    upper_slack: float
    n_directions: int
    horizon: int


class BoundViolation(AssertionError):
    pass


def _lag_poly(model: VarModel, omegas: np.ndarray) -> np.ndarray:
    """``I - sum_k A_k exp(-i k w)`` stacked over ``omegas``."""
    p = model.p
    out = np.broadcast_to(np.eye(p, dtype=complex), (omegas.size, p, p)).copy()
    for k, a in enumerate(model.coeffs, 1):
        out -= np.exp(-1j * k * omegas)[:, None, None] * a[None, :, :]
    return out


def _cal_a_batch(model: VarModel, omegas) -> np.ndarray:
    poly = _lag_poly(model, np.atleast_1d(np.asarray(omegas, dtype=np.float64)))
    # (I - sum A_k^T e^{ikw}) is the conjugate transpose of the lag polynomial
    return np.conj(np.swapaxes(poly, 1, 2)) @ poly


def _bold_cal_a_batch(comp: np.ndarray, omegas) -> np.ndarray:
    omegas = np.atleast_1d(np.asarray(omegas, dtype=np.float64))
    n = comp.shape[0]
    poly = np.eye(n, dtype=complex)[None] - np.exp(-1j * omegas)[:, None, None] * comp[None]
    return np.conj(np.swapaxes(poly, 1, 2)) @ poly


def cal_a_at(model: VarModel, omega: float) -> np.ndarray:
    """Hermitian ``p x p`` matrix ``(I - sum A_k^T e^{ikw})(I - sum A_k e^{-ikw})``."""
    return _cal_a_batch(model, omega)[0]


def bold_cal_a_at(model: VarModel, omega: float) -> np.ndarray:
    """Hermitian ``dp x dp`` matrix ``(I - A^T e^{iw})(I - A e^{-iw})`` for the companion ``A``."""
    return _bold_cal_a_batch(build_companion(model), omega)[0]


def _golden_refine(fun, a: float, b: float, maximize: bool, iters: int = 80):
    sign = -1.0 if maximize else 1.0

    def g(w):
        return sign * fun(w)

    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    gc, gd = g(c), g(d)
    for _ in range(iters):
        if gc < gd:
            b, d, gd = d, c, gc
            c = b - _GOLDEN * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + _GOLDEN * (b - a)
            gd = g(d)
        if b - a < 1e-13:
            break
    if gc < gd:
        return c, sign * gc
    return d, sign * gd


def _extremum(batch_fn, grid_points: int, maximize: bool):
    omegas = np.linspace(0.0, 2.0 * np.pi, grid_points + 1)
    eig = np.linalg.eigvalsh(batch_fn(omegas))
    vals = eig[:, -1] if maximize else eig[:, 0]
    i = int(np.argmax(vals) if maximize else np.argmin(vals))
    best_w, best_v = float(omegas[i]), float(vals[i])
    step = omegas[1] - omegas[0]

    def scalar(w):
        e = np.linalg.eigvalsh(batch_fn(np.array([w])))[0]
        return float(e[-1] if maximize else e[0])

    w_ref, v_ref = _golden_refine(scalar, best_w - step, best_w + step, maximize)
    better = v_ref > best_v if maximize else v_ref < best_v
    if better:
        return w_ref % (2.0 * np.pi), v_ref
    return best_w, best_v


def spectral_bounds(model: VarModel, grid_points: int = 512) -> SpectralBounds:
    if grid_points < 64:
        raise ValueError("grid_points must be >= 64")
    stable, rho = is_stable(model)
    if not stable:
        raise UnstableModelError(f"spectral bounds undefined for unstable model (radius {rho:.6g})")
    comp = build_companion(model)
    w_max, lam_max_a = _extremum(lambda w: _cal_a_batch(model, w), grid_points, True)
    w_min, lam_min_bold = _extremum(lambda w: _bold_cal_a_batch(comp, w), grid_points, False)
    sig_eig = np.linalg.eigvalsh(model.sigma)
    return SpectralBounds(
        script_l=float(sig_eig[0] / lam_max_a),
        script_m=float(sig_eig[-1] / lam_min_bold),
        lam_max_A=lam_max_a,
        lam_min_boldA=lam_min_bold,
        grid_points=grid_points,
        omega_max_A=w_max,
        omega_min_boldA=w_min,
    )


KRON_MAX_DIM = 24


def solve_stationary_cov(comp: np.ndarray, noise_cov: np.ndarray, tol: float = 1e-12,
                         max_doublings: int = 200) -> np.ndarray:
    """Solve ``G = A G A^T + Q`` for the stationary covariance of ``x <- A x + e``.

    Small systems use the vectorised form ``(I - A kron A) vec(G) = vec(Q)``;
    larger ones the doubled fixed-point iteration ``G <- G + A_k G A_k^T``,
    ``A_k <- A_k^2`` which sums the same series in ``log`` many steps.
    """
    n = comp.shape[0]
    if n <= KRON_MAX_DIM:
        lhs = np.eye(n * n) - np.kron(comp, comp)
        sol = np.linalg.solve(lhs, noise_cov.reshape(-1)).reshape(n, n)
    else:
        sol = noise_cov.copy()
        power = comp.copy()
        for _ in range(max_doublings):
            incr = power @ sol @ power.T
            sol = sol + incr
            power = power @ power
            if np.abs(incr).max() <= tol * max(1.0, np.abs(sol).max()):
                break
        else:
            raise RuntimeError("stationary covariance iteration did not converge")
    return 0.5 * (sol + sol.T)


def autocov_lyapunov(model: VarModel, lags: int = None) -> AutocovarianceSet:
    d, p = model.d, model.p
    lags = d if lags is None else lags
    if lags < d:
        raise ValueError("lags must be >= d")
    stable, rho = is_stable(model)
    if not stable:
        raise UnstableModelError(f"no stationary solution: spectral radius {rho:.6g} >= 1")
    comp = build_companion(model)
    noise = np.zeros((d * p, d * p))
    noise[:p, :p] = model.sigma
    cov = solve_stationary_cov(comp, noise)
    gammas = [cov[:p, k * p:(k + 1) * p].copy() for k in range(d)]
    # Yule-Walker: Gamma(h) = sum_k A_k Gamma(h - k), Gamma(-h) = Gamma(h)^T
    for h in range(d, lags):
        acc = np.zeros((p, p))
        for k, a in enumerate(model.coeffs, 1):
            j = h - k
            acc += a @ (gammas[j] if j >= 0 else gammas[-j].T)
        gammas.append(acc)
    c_x = block_toeplitz(gammas[:d])
    return AutocovarianceSet(gammas=gammas[:lags], c_x=c_x, companion_cov=cov)


def block_toeplitz(gammas) -> np.ndarray:
    """Block ``(i, j)`` is ``Gamma(j - i)`` above the diagonal and ``Gamma(i - j)^T`` below."""
    d = len(gammas)
    p = gammas[0].shape[0]
    out = np.zeros((d * p, d * p))
    for i in range(d):
        for j in range(d):
            blk = gammas[j - i] if j >= i else gammas[i - j].T
            out[i * p:(i + 1) * p, j * p:(j + 1) * p] = blk
    return out


def stacked_row_cov(comp: np.ndarray, cov0: np.ndarray, horizon: int) -> np.ndarray:
    """Covariance of ``(X_1, ..., X_N)`` for the companion process: ``E[X_i X_j^T] = G0 (A^T)^{j-i}``."""
    n = comp.shape[0]
    out = np.zeros((horizon * n, horizon * n))
    blocks = [cov0]
    for _ in range(1, horizon):
        blocks.append(blocks[-1] @ comp.T)
    for i in range(horizon):
        for j in range(i, horizon):
            blk = blocks[j - i]
            out[i * n:(i + 1) * n, j * n:(j + 1) * n] = blk
            out[j * n:(j + 1) * n, i * n:(i + 1) * n] = blk.T
    return out


def qa_matrix(cu: np.ndarray, a: np.ndarray, horizon: int) -> np.ndarray:
    """``Q_a = (I kron a^T) C_U (I kron a)``."""
    proj = np.kron(np.eye(horizon), a.reshape(1, -1))
    return proj @ cu @ proj.T


def verify_eigen_bounds(model: VarModel, bounds: SpectralBounds, autocov: AutocovarianceSet,
                        n_directions: int = 20, horizon: int = 8, seed=None,
                        rtol: float = 1e-8, raise_on_violation: bool = True) -> BoundReport:
    """Check ``lmin(C_X) >= L`` and ``lmax(Q_a) <= M`` against the exact covariances."""
    if not 1 <= horizon <= 8:
        raise ValueError("horizon must lie in [1, 8]")
    rng = np.random.default_rng(seed)
    min_eig = float(np.linalg.eigvalsh(autocov.c_x)[0])
    lower_slack = min_eig - bounds.script_l
    if raise_on_violation and min_eig < bounds.script_l * (1.0 - rtol):
        raise BoundViolation(f"lmin(C_X)={min_eig!r} below lower bound {bounds.script_l!r}")
    comp = build_companion(model)
    cu = stacked_row_cov(comp, autocov.companion_cov, horizon)
    worst = -np.inf
    for _ in range(n_directions):
        a = rng.standard_normal(comp.shape[0])
        a /= np.linalg.norm(a)
        top = float(np.linalg.eigvalsh(qa_matrix(cu, a, horizon))[-1])
        worst = max(worst, top)
        if raise_on_violation and top > bounds.script_m * (1.0 + rtol):
            raise BoundViolation(f"lmax(Q_a)={top!r} above upper bound {bounds.script_m!r}")
    return BoundReport(min_eig_cx=min_eig, lower_slack=lower_slack, max_eig_qa=worst,
                       upper_slack=bounds.script_m - worst, n_directions=n_directions,
                       horizon=horizon)
