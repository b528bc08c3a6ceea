import numpy as np
import pytest

from strucvar.config import ConfigError, RunConfig, build_penalty, describe_schema, parse_text
from strucvar.dataio import (
    DataError,
    evaluate_real,
    load_csv,
    read_matrix_csv,
    split_rows,
    standardize,
    write_csv,
    write_matrix_csv,
)
from strucvar.model import VarModel, simulate
from strucvar.penalties import PenaltyKind, PenaltySpec
from strucvar.svg import emit_svg, render_svg


def write(tmp_path, text, name="x.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_single_t_column_is_data(self, tmp_path):
        s = load_csv(write(tmp_path, "t\n1\n3\n"))
        np.testing.assert_array_equal(s.values, [[1.0], [3.0]])
        assert s.names == ["t"] and not s.standardized

    def test_leading_time_index_dropped(self, tmp_path):
        s = load_csv(write(tmp_path, "t,a,b\n0,1,2\n1,3,4\n"))
        assert s.names == ["a", "b"]
        np.testing.assert_array_equal(s.values, [[1, 2], [3, 4]])

    def test_constant_column_standardizes_to_zero(self, tmp_path):
        s = load_csv(write(tmp_path, "a,b\n5,1\n5,2\n5,4\n"), standardize_cols=True)
        np.testing.assert_array_equal(s.values[:, 0], 0.0)
        assert abs(s.values[:, 1].mean()) < 1e-9
        assert s.values[:, 1].var() == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("text,match", [
        ("a,b\n1,2\n3\n", ":3: expected 2 columns"),
        ("a\n1\nfoo\n", ":3: non-numeric cell 'foo'"),
        ("a\n1\n", "at least 2 data rows"),
        ("a\n1\nnan\n", ":3: non-finite"),
        ("", "empty file"),
    ])
    def test_errors(self, tmp_path, text, match):
        with pytest.raises(DataError, match=match):
            load_csv(write(tmp_path, text))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="nope.csv"):
            load_csv(tmp_path / "nope.csv")

    def test_round_trip_exact(self, tmp_path):
        vals = np.random.default_rng(0).standard_normal((20, 3)) * 10.0 ** np.arange(-5, 10, 5)
        path = tmp_path / "m.csv"
        write_matrix_csv(path, vals)
        np.testing.assert_array_equal(read_matrix_csv(path), vals)
        assert path.read_text().splitlines()[0] == "x1,x2,x3"

    def test_write_csv_formats(self, tmp_path):
        path = tmp_path / "r.csv"
        write_csv(path, ["a", "b", "c", "d"], [[1, 0.1, True, "L1"]])
        assert path.read_text().splitlines()[1] == "1,0.10000000000000001,1,L1"


class TestStandardize:
    def test_floor_and_stats(self):
        out, mean, std = standardize(np.array([[1.0, 2.0], [1.0, 4.0]]))
        assert std[0] == 1e-12
        np.testing.assert_array_equal(mean, [1.0, 3.0])
        np.testing.assert_array_equal(out, [[0.0, -1.0], [0.0, 1.0]])


class TestEvaluateReal:
    def test_split(self):
        tr, te = split_rows(10)
        assert tr.tolist() == list(range(8)) and te.tolist() == [8, 9]
        with pytest.raises(DataError):
            split_rows(1)

    def test_too_short(self):
        with pytest.raises(DataError):
            evaluate_real(np.zeros((6, 2)), 1, PenaltySpec.l1(2), folds=5)

    def test_holdout_never_read(self):
        values = simulate(VarModel([np.eye(3) * 0.5]), 199, seed=0).samples
        spec = PenaltySpec.l1(3)
        base = evaluate_real(values, 1, spec)
        tampered = values.copy()
        tampered[base.n_train + 1:] *= 1000.0  # every sample after the last training target
        other = evaluate_real(tampered, 1, spec)
        np.testing.assert_array_equal(base.b_hat, other.b_hat)
        assert base.lam == other.lam
        assert base.n_train == 159 and base.n_test == 40

    def test_white_noise_is_sparse(self):
        hits = 0
        for seed in range(20):
            values = simulate(VarModel([np.zeros((5, 5))]), 300, burn_in=0, seed=seed).samples
            hits += evaluate_real(values, 1, PenaltySpec.l1(5)).sparsity <= 5.0
        assert hits >= 16

    def test_sparse_var_lasso_beats_ridge(self):
        from strucvar.experiments import make_ground_truth
        model = make_ground_truth("L1", 8, 1, 0.9, seed=2, s=2)
        values = simulate(model, 600, seed=3).samples
        lasso = evaluate_real(values, 1, PenaltySpec.l1(8))
        ridge = evaluate_real(values, 1, PenaltySpec.ridge(8))
        assert lasso.mse <= ridge.mse
        assert ridge.kind is PenaltyKind.RIDGE_SQ


class TestSvg:
    def test_single_polyline(self):
        svg = render_svg({10: ([1.0, 2.0], [0.5, 0.25])})
        assert svg.count("<polyline") == 1
        assert svg.startswith("<svg") or svg.startswith("<?xml")
        assert "p=10" in svg

    def test_deterministic(self, tmp_path):
        curves = {10: ([1, 2, 4], [1, 0.7, 0.5]), 20: ([2, 4, 8], [1.1, 0.8, 0.5])}
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        emit_svg(curves, a, title="t & <x>")
        emit_svg(curves, b, title="t & <x>")
        assert a.read_bytes() == b.read_bytes()
        assert a.read_text().count("<polyline") == 2
        assert "&amp;" in a.read_text()

    def test_empty_writes_nothing(self, tmp_path):
        path = tmp_path / "e.svg"
        with pytest.raises(ValueError):
            emit_svg({}, path)
        assert not path.exists()

    def test_bad_path(self, tmp_path):
        with pytest.raises(OSError, match="missing"):
            emit_svg({1: ([1, 2], [1, 2])}, tmp_path / "missing" / "x.svg")


class TestConfig:
    def test_parse_sections_and_literals(self):
        raw = parse_text("[penalty]\nkind = sgl  # comment\nalpha = 0.3\ngroups = [2, 2]\n"
                         "[fit]\nrestart = False\n")
        assert raw["penalty.kind"] is PenaltyKind.SPARSE_GROUP_LASSO
        assert raw["penalty.groups"] == [2, 2]
        assert raw["fit.restart"] is False

    @pytest.mark.parametrize("text,match", [
        ("penalty.colour = 1", "unknown key"),
        ("fit.tol = 1e-8\nfit.tol = 1e-9", "duplicate"),
        ("fit.tol = -1", "fit.tol"),
        ("fit.max_iters = 2.5", "integer"),
        ("just words", "expected 'key = value'"),
        ("penalty.kind = elastic", "unknown penalty"),
        ("penalty.owl_weights = linear:1", "linear"),
        ("[ ]", "empty section"),
    ])
    def test_rejects(self, text, match):
        with pytest.raises(ConfigError, match=match):
            parse_text(text)

    def test_line_numbers(self):
        with pytest.raises(ConfigError, match="cfg:3:"):
            parse_text("# header\n\nbad.key = 1", "cfg")

    def test_defaults_and_override(self, tmp_path):
        path = write(tmp_path, "cv.folds = 3\n", "run.cfg")
        cfg = RunConfig.load(path)
        assert cfg.get("cv.folds") == 3 and cfg.given("cv.folds")
        assert cfg.get("fit.tol") == 1e-8 and not cfg.given("fit.tol")
        cfg.set("cv.folds", 4)
        assert cfg.get("cv.folds") == 4
        with pytest.raises(ConfigError):
            cfg.set("cv.folds", 1)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.load(tmp_path / "none.cfg")

    def test_build_penalty(self):
        cfg = RunConfig({"penalty.kind": "Owl", "penalty.owl_weights": ("linear", 2.0, 0.0)})
        spec = build_penalty(cfg, 5)
        np.testing.assert_allclose(spec.weights, [2.0, 1.5, 1.0, 0.5, 0.0])
        cfg = RunConfig({"penalty.kind": PenaltyKind.GROUP_LASSO, "penalty.groups": [2, 3]})
        assert build_penalty(cfg, 5).k_groups == 2
        with pytest.raises(ConfigError, match="sum to 5"):
            build_penalty(cfg, 6)
        with pytest.raises(ConfigError, match="needs penalty.groups"):
            build_penalty(RunConfig({"penalty.kind": PenaltyKind.GROUP_LASSO}), 4)

    def test_schema_documented(self):
        text = describe_schema()
        assert "penalty.owl_weights" in text and "default" in text
