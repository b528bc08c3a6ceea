import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strucvar.model import RegressionData, VarModel, build_regression, rescale_to_radius, simulate
from strucvar.penalties import PenaltySpec, UnsupportedOperation, contiguous_groups, prox
from strucvar.solver import (
    FitConfig,
    GramProblem,
    SolverError,
    contiguous_folds,
    cross_validate,
    fit,
    fit_path,
    fit_row,
    lambda_grid,
    lambda_max,
    sparsity_percent,
)


def var_data(seed, p=6, n=150, density=0.3, radius=0.8, d=1):
    rng = np.random.default_rng(seed)
    mats = [rng.standard_normal((p, p)) * (rng.random((p, p)) < density) + 0.3 * np.eye(p) for _ in range(d)]
    mats, _ = rescale_to_radius(mats, radius)
    model = VarModel(mats)
    return model, build_regression(simulate(model, n + d - 1, burn_in=100, seed=seed), d)


def penalties(dp):
    half = dp // 2
    return [
        PenaltySpec.l1(dp),
        PenaltySpec.group_lasso(contiguous_groups([half, dp - half]), dp),
        PenaltySpec.sparse_group_lasso(contiguous_groups([half, dp - half]), 0.5, dp),
        PenaltySpec.owl(np.linspace(1.0, 0.2, dp)),
    ]


PEN_IDS = ["l1", "gl", "sgl", "owl"]


def objective(x, y, beta, spec, lam):
    from strucvar.penalties import value
    r = y - x @ beta
    return r @ r / len(y) + lam * value(spec, beta)


class TestConfig:
    @pytest.mark.parametrize("kw", [{"tol": 0.0}, {"max_iters": 0}, {"backtrack_factor": 1.0},
                                    {"lam": -1.0}, {"init_step": 0.0}])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            FitConfig(**kw)


class TestFitRow:
    def test_ols_oracle(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((200, 5))
        y = x @ rng.standard_normal(5) + rng.standard_normal(200)
        ols = np.linalg.solve(x.T @ x, x.T @ y)
        beta, diag = fit_row(x, y, PenaltySpec.l1(5), FitConfig(lam=0.0, tol=1e-10))
        assert diag.converged
        np.testing.assert_allclose(beta, ols, rtol=1e-6, atol=1e-9)

    @pytest.mark.parametrize("lam", [0.05, 0.3, 1.0])
    def test_orthonormal_design(self, lam):
        n = 64
        q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((n, 4)))
        x = q * np.sqrt(n)  # X^T X = N I
        y = x @ np.array([1.0, -0.2, 0.05, 0.0]) + 0.1 * np.random.default_rng(2).standard_normal(n)
        ols = x.T @ y / n
        expected = np.sign(ols) * np.maximum(np.abs(ols) - lam / 2, 0.0)
        beta, _ = fit_row(x, y, PenaltySpec.l1(4), FitConfig(lam=lam, tol=1e-10))
        np.testing.assert_allclose(beta, expected, atol=1e-8)

    def test_nonfinite_is_reported(self):
        x = np.ones((3, 2))
        y = np.array([1.0, np.inf, 0.0])
        with pytest.raises(SolverError, match="non-finite"):
            fit_row(x, y, PenaltySpec.l1(2), FitConfig(lam=0.1))

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            fit_row(np.ones((4, 3)), np.ones(4), PenaltySpec.l1(2), FitConfig())

    def test_trace_monotone_and_residual(self):
        _, data = var_data(3)
        for spec in penalties(data.dp) + [PenaltySpec.ridge(data.dp)]:
            res = fit(data, spec, FitConfig(lam=0.02))
            for row, b in zip(res.per_row, res.b_hat.T):
                assert row.monotone
                assert row.converged
                assert row.residual <= 1e-8 * max(1.0, np.linalg.norm(b))


class TestFit:
    def test_zero_response(self):
        rng = np.random.default_rng(0)
        data = RegressionData(rng.standard_normal((30, 4)), np.zeros((30, 3)))
        for spec in penalties(4):
            assert np.all(fit(data, spec, FitConfig(lam=0.1)).b_hat == 0.0)
        assert lambda_max(data, PenaltySpec.l1(4)) == 0.0

    def test_identical_columns(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((50, 5))
        y = x @ rng.standard_normal(5) + rng.standard_normal(50)
        data = RegressionData(x, np.column_stack([y, y]))
        for spec in penalties(5):
            b = fit(data, spec, FitConfig(lam=0.05)).b_hat
            np.testing.assert_array_equal(b[:, 0], b[:, 1])

    def test_noiseless_recovery(self):
        rng = np.random.default_rng(2)
        b_true = rng.standard_normal((6, 3)) * (rng.random((6, 3)) < 0.5)
        x = rng.standard_normal((500, 6))
        data = RegressionData(x, x @ b_true)
        res = fit(data, PenaltySpec.l1(6), FitConfig(lam=1e-12, tol=1e-12, max_iters=20000))
        assert np.linalg.norm(res.b_hat - b_true) <= 1e-4

    @pytest.mark.parametrize("seed", range(10))
    def test_parallel_bitwise_equal(self, seed):
        _, data = var_data(seed, p=8)
        spec = penalties(8)[seed % 4]
        a = fit(data, spec, FitConfig(lam=0.03), threads=1)
        b = fit(data, spec, FitConfig(lam=0.03), threads=4)
        assert a.b_hat.tobytes() == b.b_hat.tobytes()
        for ra, rb in zip(a.per_row, b.per_row):
            assert ra.trace.tobytes() == rb.trace.tobytes()

    @pytest.mark.parametrize("k", range(4), ids=PEN_IDS)
    def test_fixed_point(self, k):
        _, data = var_data(4)
        spec = penalties(data.dp)[k]
        tol = 1e-8
        res = fit(data, spec, FitConfig(lam=0.02, tol=tol))
        prob = GramProblem.from_data(data)
        eta = prob.default_step()
        for j, beta in enumerate(res.b_hat.T):
            grad = prob.gram @ beta - prob.cross[:, j]
            moved = prox(spec, beta - eta * grad, eta * 0.02) - beta
            assert np.linalg.norm(moved) <= 2 * tol * max(1.0, np.linalg.norm(beta))

    @pytest.mark.parametrize("k", range(4), ids=PEN_IDS)
    def test_warm_matches_cold(self, k):
        _, data = var_data(5)
        spec = penalties(data.dp)[k]
        tol = 1e-8
        prob = GramProblem.from_data(data)
        grid = lambda_grid(lambda_max(data, spec), 8, 1e-2)
        path = fit_path(data, spec, grid, FitConfig(tol=tol))
        for lam, warm in zip(grid, path):
            cold = fit(data, spec, FitConfig(lam=float(lam), tol=tol), problem=prob)
            for rw, rc in zip(warm.per_row, cold.per_row):
                assert abs(rw.objective - rc.objective) <= 10 * tol * max(1.0, abs(rc.objective))

    def test_partial_results_on_failure(self):
        x = np.random.default_rng(0).standard_normal((10, 2))
        y = np.column_stack([np.ones(10), np.full(10, np.nan)])
        with pytest.raises(SolverError) as info:
            fit(RegressionData(x, y), PenaltySpec.l1(2), FitConfig(lam=0.1))
        assert "row 1" in str(info.value)
        assert info.value.partial.per_row[0].error is None


class TestLambdaMax:
    def test_arithmetic_example(self):
        # X^T y = (3, -6, 1) with N = 2
        x = np.array([[1.0, -2.0, -1.0], [1.0, -2.0, 1.0]])
        y = np.array([[1.0], [2.0]])
        assert (x.T @ y).ravel().tolist() == [3.0, -6.0, 1.0]
        assert lambda_max(RegressionData(x, y), PenaltySpec.l1(3)) == 6.0

    def test_ridge_unsupported(self):
        _, data = var_data(0)
        with pytest.raises(UnsupportedOperation):
            lambda_max(data, PenaltySpec.ridge(data.dp))

    @pytest.mark.parametrize("k", range(4), ids=PEN_IDS)
    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1))
    def test_zero_above_nonzero_below(self, k, seed):
        _, data = var_data(seed, p=5, n=60)
        spec = penalties(5)[k]
        lm = lambda_max(data, spec)
        assert np.all(fit(data, spec, FitConfig(lam=1.01 * lm)).b_hat == 0.0)
        assert np.any(fit(data, spec, FitConfig(lam=0.5 * lm)).b_hat != 0.0)


class TestGrid:
    def test_examples(self):
        np.testing.assert_allclose(lambda_grid(1.0, 2, 0.01), [1.0, 0.01])
        np.testing.assert_allclose(lambda_grid(1.0, 3, 0.01), [1.0, 0.1, 0.01])
        g = lambda_grid(2.5)
        assert g.size == 30 and np.all(np.diff(g) < 0)
        assert g[-1] == pytest.approx(2.5e-3)

    @pytest.mark.parametrize("args", [(0.0,), (-1.0,), (1.0, 1), (1.0, 5, 1.5)])
    def test_rejects(self, args):
        with pytest.raises(ValueError):
            lambda_grid(*args)


class TestCV:
    def test_folds(self):
        folds = contiguous_folds(10, 3)
        assert [f.tolist() for f in folds] == [[0, 1, 2], [3, 4, 5, 6], [7, 8, 9]]
        with pytest.raises(ValueError):
            contiguous_folds(2, 3)

    def test_single_lambda(self):
        _, data = var_data(0, n=50)
        res = cross_validate(data, PenaltySpec.l1(data.dp), [0.1])
        assert res.best_lambda == 0.1

    def test_ties_prefer_larger(self):
        rng = np.random.default_rng(0)
        data = RegressionData(rng.standard_normal((20, 3)), np.zeros((20, 2)))
        res = cross_validate(data, PenaltySpec.l1(3), [0.1, 0.5, 0.3], folds=4)
        assert res.best_lambda == 0.5

    def test_pure_noise_picks_large_lambda(self):
        hits = 0
        spec = PenaltySpec.l1(5)
        for seed in range(20):
            traj = simulate(VarModel([np.zeros((5, 5))]), 100, burn_in=0, seed=seed)
            data = build_regression(traj, 1)
            grid = lambda_grid(lambda_max(data, spec), 30)
            res = cross_validate(data, spec, grid)
            hits += res.best_index < 10
        assert hits >= 16

    def test_strong_signal_near_oracle(self):
        rng = np.random.default_rng(7)
        b = np.zeros((10, 4))
        b[rng.choice(10, 3, replace=False), :] = 2.0
        x = rng.standard_normal((400, 10))
        data = RegressionData(x, x @ b + 0.1 * rng.standard_normal((400, 4)))
        x_te = rng.standard_normal((400, 10))
        y_te = x_te @ b + 0.1 * rng.standard_normal((400, 4))
        spec = PenaltySpec.l1(10)
        grid = lambda_grid(lambda_max(data, spec), 30)
        cv = cross_validate(data, spec, grid)
        path = fit_path(data, spec, grid)
        test_mse = [np.mean((y_te - x_te @ r.b_hat) ** 2) for r in path]
        chosen = test_mse[cv.best_index]
        assert chosen <= 1.1 * min(test_mse)


class TestSparsity:
    def test_examples(self):
        assert sparsity_percent(np.zeros((3, 4))) == 0.0
        assert sparsity_percent(np.ones((3, 4))) == 100.0
        assert sparsity_percent(np.array([[1e-9, 1.0]])) == 50.0

    def test_recovery_near_truth(self):
        p = 10
        rng = np.random.default_rng(3)
        a = np.zeros((p, p))
        for i in range(p):
            a[i, rng.choice(p, 4, replace=False)] = rng.choice([-1, 1], 4) * rng.uniform(0.5, 1.0, 4)
        mats, _ = rescale_to_radius([a], 0.9)
        data = build_regression(simulate(VarModel(mats), 2000, seed=3), 1)
        spec = PenaltySpec.l1(p)
        res = fit(data, spec, FitConfig(lam=0.1 * lambda_max(data, spec)))
        nz = (np.abs(res.b_hat) > 1e-8).sum(axis=0)
        assert np.all(np.abs(nz - 4) <= 2)
