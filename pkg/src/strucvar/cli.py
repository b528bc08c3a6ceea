"""Command-line entry point: ``strucvar <command> [options]``."""
import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import empirical_re_constant, theory_report
from .config import ConfigError, RunConfig, build_penalty, describe_schema
from .dataio import DataError, evaluate_real, load_csv, write_csv, write_matrix_csv
from .experiments import (
    ExperimentError,
    ScalingConfig,
    alignment_metric,
    best_records,
    rescale_axis,
    run_scaling,
)
from .model import ComputationError, ModelError, VarModel, build_regression, simulate, spectral_radius
from .penalties import PenaltyError, structure_stats
from .solver import (
    FitConfig,
    GramProblem,
    SolverError,
    cross_validate,
    fit,
    lambda_grid,
    lambda_max,
)
from .spectral import autocov_lyapunov, spectral_bounds
from .svg import emit_svg

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("strucvar")

HEADERS = {
    "simulate": "trajectory.csv: t,x1,...,xp (T+1 rows)\n  truth.csv: y1,...,yp (d*p rows, stacked [A_1^T; ...; A_d^T])",
    "spectral": "stdout: radius, lambda_max_A, lambda_min_boldA, script_L, script_M, min_eig_Cx (key = value)",
    "fit": "b_hat.csv: y1,...,yp (d*p rows)\n  diagnostics.csv: row,iters,objective,residual,converged",
    "cv": "cv.csv: lambda,lambda_rel,cv_mse\n  b_hat.csv: y1,...,yp (refit at the selected lambda)",
    "theory": "stdout: width_mean, width_stderr, rate, n_min, kappa_hat, det_bound (key = value)",
    "scaling": "records.csv: kind,p,d,N,s,s_g,K,m,lambda,lambda_rel,err_mean,err_std,is_best\n"
               "  row_errors.csv: p,N,lambda,err_row_mean,err_row_std\n"
               "  alignment.csv: rescaled_x,curve_p,err",
    "eval-real": "eval.csv: penalty,lambda,mse,sparsity_percent,n_train,n_test\n  b_hat_<penalty>.csv: y1,...,yp",
}


def _globals_parent(suppress: bool) -> argparse.ArgumentParser:
    dflt = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", default=dflt(None), metavar="PATH", help="key = value run configuration")
    parent.add_argument("--seed", type=int, default=dflt(0), help="master seed (u64, default 0)")
    parent.add_argument("--threads", type=int, default=dflt(1), help="worker threads (default 1)")
    parent.add_argument("--out-dir", default=dflt("."), metavar="PATH", help="output directory (default .)")
    parent.add_argument("-v", "--verbose", action="store_true", default=dflt(False))
    return parent


def _penalty_args(p: argparse.ArgumentParser, multi: bool = False):
    if multi:
        p.add_argument("--penalty", action="append", metavar="KIND",
                       help="penalty kind; repeat to compare several (default L1 and RidgeSq)")
    else:
        p.add_argument("--penalty", metavar="KIND", help="L1 | GroupLasso | SparseGroupLasso | Owl | RidgeSq")
    p.add_argument("--groups", metavar="SIZES", help="comma-separated contiguous group sizes")
    p.add_argument("--alpha", type=float, help="sparse-group mixing weight")
    p.add_argument("--owl-weights", metavar="SPEC", help="linear:<hi>:<lo> or comma-separated list")


def build_parser() -> argparse.ArgumentParser:
    epilog = "CSV outputs per command:\n" + "\n".join(
        f"  {k}:\n    " + v.replace("\n  ", "\n    ") for k, v in HEADERS.items())
    epilog += "\n\nConfiguration keys:\n" + describe_schema()
    epilog += "\n\nExit codes: 0 success, 2 config error, 3 data error, 4 numerical failure."
    parser = argparse.ArgumentParser(prog="strucvar", parents=[_globals_parent(False)],
                                     formatter_class=argparse.RawDescriptionHelpFormatter,
                                     description="Structured-sparsity VAR estimation and scaling studies.",
                                     epilog=epilog)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    shared = _globals_parent(True)

    def add(name, help_text):
        return sub.add_parser(name, parents=[shared], help=help_text,
                              formatter_class=argparse.RawDescriptionHelpFormatter,
                              epilog="Outputs:\n  " + HEADERS[name])

    p = add("simulate", "draw a trajectory from a planted sparse VAR or a given model")
    p.add_argument("--coeffs", metavar="CSV", help="stacked coefficient matrix (d*p rows x p columns)")
    p.add_argument("--order", type=int, help="lag order d")
    p.add_argument("--p", type=int, help="number of series for a planted model")
    p.add_argument("--T", type=int, help="samples after burn-in")
    p.add_argument("--s", type=int, help="nonzeros per row of the planted model")
    p.add_argument("--radius", type=float, help="target spectral radius of the planted model")
    p.add_argument("--burn-in", type=int)

    p = add("spectral", "conditioning constants of a model's spectral density")
    p.add_argument("--coeffs", metavar="CSV", required=True)
    p.add_argument("--order", type=int)
    p.add_argument("--sigma", metavar="CSV", help="noise covariance (p x p); identity if omitted")
    p.add_argument("--grid-points", type=int)

    for name, text in (("fit", "fit B at a fixed lambda or by cross-validation"),
                       ("cv", "cross-validate lambda over a log grid")):
        p = add(name, text)
        p.add_argument("--data", metavar="CSV", required=True)
        p.add_argument("--order", type=int)
        _penalty_args(p)
        p.add_argument("--folds", type=int)
        p.add_argument("--grid-size", type=int)
        p.add_argument("--standardize", action="store_true", default=None)
        if name == "fit":
            grp = p.add_mutually_exclusive_group()
            grp.add_argument("--lambda", dest="lam", type=float)
            grp.add_argument("--cv", action="store_true")

    p = add("theory", "Gaussian width, predicted rate, sample bound and deterministic error bound")
    p.add_argument("--coeffs", metavar="CSV", required=True)
    p.add_argument("--order", type=int)
    _penalty_args(p)
    p.add_argument("--n", type=int, help="sample size")
    p.add_argument("--lambda", dest="lam", type=float, help="lambda for det_bound (default width_mean/sqrt(n))")
    p.add_argument("--width-samples", type=int)

    p = add("scaling", "synthetic error-versus-N sweep with curve-collapse diagnostics")
    p.add_argument("--runs", type=int, help="override scaling.runs")
    p.add_argument("--svg", metavar="PATH", help="write <stem>_raw.svg and <stem>_rescaled.svg")

    p = add("eval-real", "80/20 time-split evaluation of CV-tuned penalties on a series")
    p.add_argument("--data", metavar="CSV", required=True)
    p.add_argument("--order", type=int)
    _penalty_args(p, multi=True)
    p.add_argument("--folds", type=int)
    p.add_argument("--grid-size", type=int)
    p.add_argument("--no-standardize", action="store_true")
    return parser


# ---------------------------------------------------------------------------


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    mapping = {
        "order": "data.order", "alpha": "penalty.alpha", "folds": "cv.folds", "grid_size": "cv.grid_size",
        "p": "simulate.p", "T": "simulate.T", "s": "simulate.s", "radius": "simulate.radius",
        "burn_in": "simulate.burn_in", "grid_points": "spectral.grid_points", "n": "theory.n",
        "width_samples": "theory.width_samples", "runs": "scaling.runs", "standardize": "data.standardize",
    }
    for attr, key in mapping.items():
        val = getattr(args, attr, None)
        if val is not None:
            cfg.set(key, val)
    kinds = getattr(args, "penalty", None)
    if isinstance(kinds, list):
        cfg.set("eval.penalties", kinds)
    elif kinds is not None:
        cfg.set("penalty.kind", kinds)
    if getattr(args, "groups", None):
        try:
            cfg.set("penalty.groups", [int(x) for x in args.groups.split(",")])
        except ValueError:
            raise ConfigError("--groups must be comma-separated integers") from None
    if getattr(args, "owl_weights", None):
        spec = args.owl_weights
        if not spec.startswith("linear:"):
            try:
                spec = [float(x) for x in spec.split(",")]
            except ValueError:
                raise ConfigError("--owl-weights must be linear:<hi>:<lo> or numbers") from None
        cfg.set("penalty.owl_weights", spec)
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    if not 0 <= args.seed < 2 ** 64:
        raise ConfigError("--seed must be an unsigned 64-bit integer")
    return cfg


def _fit_config(cfg: RunConfig, lam: float = 0.0) -> FitConfig:
    return FitConfig(lam=lam, max_iters=cfg.get("fit.max_iters"), tol=cfg.get("fit.tol"),
                     backtrack_factor=cfg.get("fit.backtrack"), restart=cfg.get("fit.restart"))


def _read_model(path, d, sigma_path=None) -> VarModel:
    b = load_csv(path).values
    p = b.shape[1]
    if b.shape[0] != d * p:
        raise DataError(f"{path}: {b.shape[0]} rows, expected d*p = {d * p} for d={d}")
    sigma = load_csv(sigma_path).values if sigma_path else None
    return VarModel.from_stacked(b, sigma)


def _kv(items):
    return "\n".join(f"{k} = {format(float(v), '.17g') if isinstance(v, float) else v}" for k, v in items)


def _print_kv(items, out_dir, name):
    text = _kv(items)
    print(text)
    (out_dir / name).write_text(text + "\n", encoding="utf-8")


def cmd_simulate(args, cfg, out_dir):
    d = cfg.get("data.order")
    rng = np.random.SeedSequence(args.seed)
    truth_seq, sim_seq = rng.spawn(2)
    if args.coeffs:
        model = _read_model(args.coeffs, d)
    else:
        from .experiments import make_ground_truth
        model = make_ground_truth("L1", cfg.get("simulate.p"), d, cfg.get("simulate.radius"), truth_seq,
                                  s=cfg.get("simulate.s"))
    traj = simulate(model, cfg.get("simulate.T"), burn_in=cfg.get("simulate.burn_in"), seed=sim_seq)
    write_csv(out_dir / "trajectory.csv", ["t"] + [f"x{j + 1}" for j in range(model.p)],
              [[t] + list(row) for t, row in enumerate(traj.samples)])
    write_matrix_csv(out_dir / "truth.csv", model.stacked(), prefix="y")
    log.info("wrote %d samples of a p=%d, d=%d VAR (radius %.6g)", traj.samples.shape[0], model.p, d,
             spectral_radius(model))


def cmd_spectral(args, cfg, out_dir):
    model = _read_model(args.coeffs, cfg.get("data.order"), args.sigma)
    bounds = spectral_bounds(model, cfg.get("spectral.grid_points"))
    ac = autocov_lyapunov(model)
    _print_kv([("radius", spectral_radius(model)), ("lambda_max_A", bounds.lam_max_A),
               ("lambda_min_boldA", bounds.lam_min_boldA), ("script_L", bounds.script_l),
               ("script_M", bounds.script_m), ("min_eig_Cx", float(np.linalg.eigvalsh(ac.c_x)[0]))],
              out_dir, "spectral.txt")


def _series_data(args, cfg):
    series = load_csv(args.data, standardize_cols=cfg.get("data.standardize"))
    d = cfg.get("data.order")
    if series.values.shape[0] <= d + 1:
        raise DataError(f"{args.data}: series too short for d={d}")
    return series, build_regression(series.values, d), d


def _write_fit(out_dir, res):
    write_matrix_csv(out_dir / "b_hat.csv", res.b_hat, prefix="y")
    write_csv(out_dir / "diagnostics.csv", ["row", "iters", "objective", "residual", "converged"],
              [[j, r.iterations, r.objective, r.residual, r.converged] for j, r in enumerate(res.per_row)])


def _cv(args, cfg, data, spec):
    prob = GramProblem.from_data(data)
    if spec.is_norm:
        lmax = lambda_max(data, spec, prob)
        if not lmax > 0:
            raise DataError("targets are identically zero; lambda grid is empty")
        grid = lambda_grid(lmax, cfg.get("cv.grid_size"), cfg.get("cv.ratio"))
    else:
        from .dataio import ridge_grid
        lmax, grid = float("nan"), ridge_grid(prob, cfg.get("cv.grid_size"))
    cv = cross_validate(data, spec, grid, cfg.get("cv.folds"), _fit_config(cfg), threads=args.threads)
    return cv, lmax, prob


def cmd_fit(args, cfg, out_dir):
    _, data, _ = _series_data(args, cfg)
    spec = build_penalty(cfg, data.dp)
    if args.cv:
        cv, lmax, prob = _cv(args, cfg, data, spec)
        lam = cv.best_lambda
    else:
        lam = args.lam if args.lam is not None else cfg.get("fit.lambda")
        prob = GramProblem.from_data(data)
        lmax = lambda_max(data, spec, prob) if spec.is_norm else float("nan")
    res = fit(None, spec, _fit_config(cfg, lam), threads=args.threads, problem=prob)
    _write_fit(out_dir, res)
    rel = lam / lmax if lmax and lmax > 0 else float("nan")
    print(_kv([("lambda", float(lam)), ("lambda_rel", rel), ("converged", int(res.converged))]))
    if not res.converged:
        log.warning("some rows hit the iteration cap; see diagnostics.csv")


def cmd_cv(args, cfg, out_dir):
    _, data, _ = _series_data(args, cfg)
    spec = build_penalty(cfg, data.dp)
    cv, lmax, prob = _cv(args, cfg, data, spec)
    write_csv(out_dir / "cv.csv", ["lambda", "lambda_rel", "cv_mse"],
              [[lam, lam / lmax if lmax > 0 else float("nan"), m] for lam, m in zip(cv.grid, cv.cv_mse)])
    res = fit(None, spec, _fit_config(cfg, cv.best_lambda), threads=args.threads, problem=prob)
    write_matrix_csv(out_dir / "b_hat.csv", res.b_hat, prefix="y")
    print(_kv([("best_lambda", cv.best_lambda), ("best_cv_mse", float(cv.cv_mse[cv.best_index]))]))


def cmd_theory(args, cfg, out_dir):
    d = cfg.get("data.order")
    model = _read_model(args.coeffs, d)
    spec = build_penalty(cfg, d * model.p)
    n = cfg.get("theory.n")
    stats = structure_stats(spec, model.stacked().T)
    bounds = spectral_bounds(model)
    width_seed, sim_seed, re_seed = np.random.SeedSequence(args.seed).spawn(3)
    from .analysis import gaussian_width_mc
    w_mean, _ = gaussian_width_mc(spec, d * model.p, cfg.get("theory.width_samples"), width_seed)
    lam = args.lam if args.lam is not None else w_mean / math.sqrt(n)
    traj = simulate(model, n + d - 1, seed=sim_seed)
    data = build_regression(traj, d)
    kappa_hat = empirical_re_constant(data, spec, model.stacked(), trials=cfg.get("theory.re_trials"),
                                      r_const=cfg.get("theory.r_const"), seed=re_seed,
                                      config=_fit_config(cfg))
    rep = theory_report(spec, stats, bounds, model.p, d, n, lam, cfg.get("theory.width_samples"),
                        width_seed, c_const=cfg.get("theory.c_const"), r_const=cfg.get("theory.r_const"),
                        kappa_hat=kappa_hat)
    _print_kv(rep.as_items(), out_dir, "theory.txt")


def _scaling_config(cfg, args) -> ScalingConfig:
    return ScalingConfig(
        kind=cfg.get("scaling.kind"), p_list=cfg.get("scaling.p_list"), n_list=cfg.get("scaling.n_list"),
        d=cfg.get("scaling.d"), s=cfg.get("scaling.s"), k_groups=cfg.get("scaling.k_groups"),
        group_size=cfg.get("scaling.group_size"), s_g=cfg.get("scaling.s_g"), alpha=cfg.get("scaling.alpha"),
        owl_hi=cfg.get("scaling.owl_hi"), owl_lo=cfg.get("scaling.owl_lo"), runs=cfg.get("scaling.runs"),
        lambda_grid_size=cfg.get("scaling.grid_size"), lambda_ratio=cfg.get("scaling.ratio"),
        target_radius=cfg.get("scaling.radius"), master_seed=args.seed, burn_in=cfg.get("scaling.burn_in"),
        fit=_fit_config(cfg), threads=args.threads)


def cmd_scaling(args, cfg, out_dir):
    try:
        sc = _scaling_config(cfg, args)
    except ExperimentError as exc:
        raise ConfigError(str(exc)) from None
    result = run_scaling(sc)
    for f in result.failures:
        log.warning("cell p=%d N=%d run=%d failed: %s", f.p, f.n, f.run, f.message)
    if not result.records:
        raise ComputationError("every cell of the sweep failed")
    write_csv(out_dir / "records.csv",
              ["kind", "p", "d", "N", "s", "s_g", "K", "m", "lambda", "lambda_rel", "err_mean", "err_std", "is_best"],
              [[r.kind.value, r.p, r.d, r.n, r.stats.s, r.stats.s_g, r.stats.k_groups, r.stats.m, r.lam,
                r.lam_rel, r.err_mean, r.err_std, r.is_best] for r in result.records])
    write_csv(out_dir / "row_errors.csv", ["p", "N", "lambda", "err_row_mean", "err_row_std"],
              [[r.p, r.n, r.lam, r.err_row_mean, r.err_row_std] for r in result.records])
    curves, label = rescale_axis(result.records, sc.kind)
    write_csv(out_dir / "alignment.csv", ["rescaled_x", "curve_p", "err"],
              [[x, p, y] for p, (xs, ys) in curves.items() for x, y in zip(xs, ys)])
    summary = [("fits", result.solver.fits), ("failed_cells", len(result.failures))]
    if len(curves) >= 2:
        try:
            rep = alignment_metric(curves, label=label)
            summary.append(("max_pairwise_dev", rep.max_pairwise_dev))
            summary += [(f"slope_p{p}", s) for p, s in rep.loglog_slope.items()]
        except ExperimentError as exc:
            log.warning("alignment skipped: %s", exc)
    print(_kv(summary))
    if args.svg:
        stem = Path(args.svg)
        stem = stem.with_suffix("") if stem.suffix == ".svg" else stem
        best = best_records(result.records)
        raw = {p: ([r.n for r in best if r.p == p], [r.err_mean for r in best if r.p == p])
               for p in sorted({r.p for r in best})}
        emit_svg(raw, f"{stem}_raw.svg", x_label="N", y_label="error at best lambda",
                 title=f"{sc.kind.value}: error vs N")
        emit_svg(curves, f"{stem}_rescaled.svg", x_label=label, y_label="error at best lambda",
                 title=f"{sc.kind.value}: rescaled")


def cmd_eval_real(args, cfg, out_dir):
    series = load_csv(args.data)
    d = cfg.get("data.order")
    rows = []
    for kind in cfg.get("eval.penalties"):
        spec = build_penalty(cfg, d * series.values.shape[1], kind)
        res = evaluate_real(series, d, spec, cfg.get("cv.folds"), _fit_config(cfg), cfg.get("cv.grid_size"),
                            cfg.get("cv.ratio"), standardize_cols=not args.no_standardize, threads=args.threads)
        rows.append([kind.value, res.lam, res.mse, res.sparsity, res.n_train, res.n_test])
        write_matrix_csv(out_dir / f"b_hat_{kind.value}.csv", res.b_hat, prefix="y")
    write_csv(out_dir / "eval.csv", ["penalty", "lambda", "mse", "sparsity_percent", "n_train", "n_test"], rows)
    for r in rows:
        print(f"{r[0]}: mse = {r[2]:.6g}, sparsity_percent = {r[3]:.4g}, lambda = {r[1]:.6g}")


COMMANDS = {"simulate": cmd_simulate, "spectral": cmd_spectral, "fit": cmd_fit, "cv": cmd_cv,
            "theory": cmd_theory, "scaling": cmd_scaling, "eval-real": cmd_eval_real}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = _load_config(args)
        out_dir = Path(args.out_dir)
        os.makedirs(out_dir, exist_ok=True)
        COMMANDS[args.command](args, cfg, out_dir)
    except (ConfigError, PenaltyError, ExperimentError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, ComputationError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ModelError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
