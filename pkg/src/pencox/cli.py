"""Command-line driver.

Subcommands
-----------
simulate   draw a synthetic dataset (CSV + JSON sidecar with the ground truth)
fit        fit a penalized Cox model with cross-validated penalty selection
evaluate   score a fitted model on a dataset (K-index, concordance, recovery)
select     multi-partition best-model selection with importance/power indexes
table      run an experiment preset grid and emit aggregated result tables
curves     emit lasso vs adaptive-lasso thresholding-function data for plotting

Every command is deterministic given --seed; each artifact records the seed
that produced it. Errors are reported as one JSON object on stderr and a
nonzero exit code.
"""

from __future__ import annotations

import argparse
import importlib.resources
import json
import sys
from pathlib import Path

import numpy as np
import jsonschema

from . import crossval, harness, metrics, penalized, selection as selection_mod, \
    simulate as simulate_mod, weights as weights_mod
from .data import DataError, load_csv, save_csv, standardize
from .penalized import PenaltyConfig
from .rsf import ForestConfig
from .simulate import SimulationConfig


class CliError(Exception):
    """User-facing failure with a stable, machine-readable message."""


def _schema(name: str) -> dict:
    ref = importlib.resources.files("pencox.schemas").joinpath(f"{name}.schema.json")
    return json.loads(ref.read_text(encoding="utf-8"))


def emit_json(obj: dict, path, schema_name: str) -> None:
    jsonschema.validate(obj, _schema(schema_name))
    text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _finite_or_none(x):
    x = float(x)
    return x if np.isfinite(x) else None


def sidecar_path(data_path) -> Path:
    return Path(data_path).with_suffix(".meta.json")


def cmd_simulate(args) -> int:
    cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    allowed = {"p", "phi", "n", "coef_scheme", "covariance", "alpha", "rho",
               "theta", "support", "calibration_seed", "mc_samples"}
    unknown = set(cfg) - allowed - {"seed"}
    if unknown:
        raise CliError(f"unknown simulation config keys: {sorted(unknown)}")
    fields = {k: cfg[k] for k in allowed if k in cfg}
    if "support" in fields and fields["support"] is not None:
        fields["support"] = tuple(int(j) for j in fields["support"])
    config = SimulationConfig(seed=seed, **fields)
    sim = simulate_mod.generate(config)
    save_csv(sim.dataset, args.out)
    sidecar = {
        "beta_true": [float(b) for b in sim.beta_true],
        "nu": _finite_or_none(sim.nu),
        "seed": seed,
        "achieved_censoring": sim.achieved_censoring,
        "config": {
            "p": config.p, "phi": config.phi, "n": config.n,
            "coef_scheme": config.coef_scheme, "covariance": config.covariance,
            "alpha": config.alpha, "rho": config.rho, "theta": config.theta,
        },
    }
    emit_json(sidecar, sidecar_path(args.out), "sidecar")
    print(f"wrote {args.out} and {sidecar_path(args.out)}")
    return 0


def _fit_pipeline(data, penalty: str, weight_method: str | None, gamma,
                  folds: int, cv_mode: str, seed: int, forest_trees: int):
    """standardize -> weights -> cv_path -> fit at lambda_min, original scale."""
    std, transform = standardize(data)
    flags = list(f"constant-column-{j}" for j in transform.constant_columns)
    kind = "lasso" if penalty == "lasso" else "adaptive_lasso"
    wv = None
    gamma_used = None
    if kind == "adaptive_lasso":
        if weight_method is None:
            raise CliError("--weights is required for the adaptive penalty")
        forest = ForestConfig(n_trees=forest_trees, seed=seed) \
            if weight_method == "rsf" else None
        base_gamma = 1.0 if gamma == "grid" else float(gamma)
        wv = weights_mod.compute_weights(weight_method, std, gamma=base_gamma,
                                         seed=seed, forest=forest)
        if gamma == "grid":
            gamma_used, _ = weights_mod.select_gamma(std, wv, kind=kind,
                                                     folds=folds, mode=cv_mode,
                                                     seed=seed)
            wv = wv.with_gamma(gamma_used)
        else:
            gamma_used = base_gamma
        flags.extend(wv.flags)
    config = PenaltyConfig(kind=kind, weights=wv)
    cv = crossval.cv_path(std, config, folds=folds, mode=cv_mode, seed=seed,
                          warn_unstandardized=False)
    path = penalized.fit_path(std, config, lambdas=cv.lambdas[:cv.index_min + 1],
                              warn_unstandardized=False)
    fit = path.fits[-1]
    flags.extend(fit.flags)
    beta = transform.coefficients_to_original(fit.beta)
    return beta, cv, fit, wv, gamma_used, flags


def cmd_fit(args) -> int:
    data = load_csv(args.data)
    beta, cv, fit, wv, gamma_used, flags = _fit_pipeline(
        data, args.penalty, args.weights, args.gamma, args.folds, args.cv_mode,
        args.seed, args.forest_trees)
    weights_obj = None
    if wv is not None:
        weights_obj = {"method": wv.source, "gamma": float(gamma_used),
                       "n_excluded": int(np.sum(~np.isfinite(wv.w))),
                       "flags": list(wv.flags)}
    model = {
        "penalty": "lasso" if args.penalty == "lasso" else "adaptive_lasso",
        "weights": weights_obj,
        "lambda": float(fit.lambda_),
        "lambda_unscaled": float(fit.lambda_) * data.n,
        "cve_min": float(cv.cve.min()),
        "cve": [float(v) for v in cv.cve],
        "lambdas": [float(v) for v in cv.lambdas],
        "coefficients": [float(b) for b in beta],
        "names": list(data.names),
        "n_nonzero": int(np.count_nonzero(beta)),
        "seed": args.seed,
        "folds": args.folds,
        "cv_mode": args.cv_mode,
        "n_train": data.n,
        "flags": sorted(set(flags)),
    }
    emit_json(model, args.out, "model")
    print(f"wrote {args.out} ({model['n_nonzero']} nonzero of {data.p})")
    return 0


def cmd_evaluate(args) -> int:
    model = json.loads(Path(args.model).read_text(encoding="utf-8"))
    data = load_csv(args.data)
    beta = np.asarray(model["coefficients"], dtype=float)
    if beta.size != data.p:
        raise CliError(f"model has {beta.size} coefficients but data has "
                       f"{data.p} covariates")
    scores = data.covariates @ beta
    out = {
        "k_index": float(metrics.cpe_k_index(scores)),
        "harrell_c": None,
        "uno_c": None,
        "tau": args.tau,
        "n": data.n,
        "seed": args.seed,
        "selection": None,
    }
    try:
        out["harrell_c"] = float(metrics.harrell_c(data.times, data.status, scores))
    except metrics.UndefinedMetricError:
        pass
    if args.tau is not None:
        out["uno_c"] = float(metrics.uno_c(data.times, data.status, scores,
                                           tau=args.tau))
    if args.truth is not None:
        sidecar = json.loads(Path(args.truth).read_text(encoding="utf-8"))
        beta_true = np.asarray(sidecar["beta_true"], dtype=float)
        sm = metrics.selection_metrics(beta_true, beta, test_data=data)
        out["selection"] = {"tpr": sm.tpr, "fpr": sm.fpr, "fnr": sm.fnr,
                            "f1": sm.f1, "l2_error": sm.l2_error,
                            "median_risk_ratio": sm.median_risk_ratio}
    emit_json(out, args.out, "metrics")
    print(f"wrote {args.out}")
    return 0


def cmd_select(args) -> int:
    data = load_csv(args.data)
    kind = "lasso" if args.penalty == "lasso" else "adaptive_lasso"
    weight_method = None if kind == "lasso" else args.weights
    if kind == "adaptive_lasso" and weight_method is None:
        raise CliError("--weights is required for the adaptive penalty")
    gamma = 1.0 if args.gamma == "grid" else float(args.gamma)
    run = selection_mod.run_selection(
        data, kind=kind, weight_method=weight_method, gamma=gamma,
        n_iterations=args.iterations, train_size=args.train_size,
        seed=args.seed, folds=args.folds,
        literal_power_index=args.literal_power_index, n_jobs=args.threads)
    report = {
        "n_iterations": run.n_iterations,
        "iterations": [
            {"seed": int(r.seed), "k_index": float(r.k_index),
             "power": float(run.power[i]), "lambda": float(r.lambda_),
             "n_active": int(r.n_active),
             "support": [int(j) for j in np.flatnonzero(r.beta != 0)]}
            for i, r in enumerate(run.records)],
        "importance": [float(v) for v in run.importance],
        "k_top": run.k_top,
        "best_index": run.best_index,
        "final": {
            "support": [int(j) for j in run.final_fit.support],
            "coefficients": [float(b) for b in run.final_fit.beta],
            "converged": bool(run.final_fit.converged),
            "flags": list(run.final_fit.flags),
        },
        "seed": args.seed,
        "penalty": {"kind": kind, "weights": weight_method, "gamma": gamma},
        "literal_power_index": bool(args.literal_power_index),
    }
    emit_json(report, args.out, "selection")
    if args.importance_csv:
        order = selection_mod.importance_ranking(run)
        lines = ["rank,column,name,importance"]
        for rank, j in enumerate(order, start=1):
            lines.append(f"{rank},{int(j)},{data.names[j]},"
                         f"{run.importance[j]!r}")
        Path(args.importance_csv).write_text("\n".join(lines) + "\n",
                                             encoding="utf-8")
    print(f"wrote {args.out} (best iteration {run.best_index}, "
          f"{len(run.final_fit.support)} final variables)")
    return 0


def cmd_table(args) -> int:
    if args.preset not in harness.PRESETS:
        raise CliError(f"unknown preset {args.preset!r}; "
                       f"available: {sorted(harness.PRESETS)}")
    preset = harness.PRESETS[args.preset]
    if args.replicates is not None:
        from dataclasses import replace as _replace
        preset = _replace(preset, replicates=args.replicates)
    scale = args.scale
    if scale not in ("full", "desk"):
        scale = float(scale)
    results = harness.run_preset(preset, args.out, seed=args.seed,
                                 n_jobs=args.threads, scale=scale)
    out_dir = Path(args.out)
    (out_dir / "results.csv").write_text(harness.results_csv(results),
                                         encoding="utf-8")
    if any("selected_per_block_mean" in r for r in results):
        (out_dir / "blocks_selected.csv").write_text(
            harness.block_tables_csv(results, "selected"), encoding="utf-8")
        (out_dir / "blocks_correct.csv").write_text(
            harness.block_tables_csv(results, "correct"), encoding="utf-8")
    print(f"wrote {out_dir}/results.csv ({len(results)} design points)")
    return 0


def cmd_curves(args) -> int:
    """Thresholding-function data: lasso vs adaptive soft threshold."""
    z = np.linspace(-args.z_max, args.z_max, args.points)
    lam = args.penalty_level
    lasso = np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)
    with np.errstate(divide="ignore"):
        w = np.where(z == 0, np.inf, 1.0 / np.abs(z) ** args.gamma)
    adaptive = np.sign(z) * np.maximum(np.abs(z) - lam * w, 0.0)
    lines = ["z,lasso,adaptive_lasso"]
    for i in range(z.size):
        lines.append(f"{z[i]!r},{lasso[i]!r},{adaptive[i]!r}")
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pencox",
        description="Penalized Cox regression: lasso and adaptive lasso with "
                    "ridge/PCA/univariate/RSF weights, CV, metrics, simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    p_sim.add_argument("--config", required=True, help="JSON simulation config")
    p_sim.add_argument("--out", required=True, help="output CSV path")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="fit a penalized Cox model")
    p_fit.add_argument("--data", required=True)
    p_fit.add_argument("--penalty", choices=["lasso", "alasso"], default="lasso")
    p_fit.add_argument("--weights", choices=["ridge", "pca", "uni", "rsf"],
                       default=None)
    p_fit.add_argument("--gamma", default="1.0",
                       help="weight exponent in [0.2, 2], or 'grid' for CV")
    p_fit.add_argument("--folds", type=int, default=10)
    p_fit.add_argument("--cv-mode", choices=["vvh", "basic"], default="vvh")
    p_fit.add_argument("--forest-trees", type=int, default=300)
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--out", required=True)
    p_fit.set_defaults(func=cmd_fit)

    p_eval = sub.add_parser("evaluate", help="score a fitted model on a dataset")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--truth", default=None, help="simulation sidecar JSON")
    p_eval.add_argument("--tau", type=float, default=None)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--out", required=True)
    p_eval.set_defaults(func=cmd_evaluate)

    p_sel = sub.add_parser("select", help="multi-partition best-model selection")
    p_sel.add_argument("--data", required=True)
    p_sel.add_argument("--penalty", choices=["lasso", "alasso"], default="lasso")
    p_sel.add_argument("--weights", choices=["ridge", "pca", "uni", "rsf"],
                       default=None)
    p_sel.add_argument("--gamma", default="1.0")
    p_sel.add_argument("--iterations", type=int, default=100)
    p_sel.add_argument("--train-size", type=int, default=None)
    p_sel.add_argument("--folds", type=int, default=10)
    p_sel.add_argument("--literal-power-index", action="store_true",
                       help="use the least-important-variable member set")
    p_sel.add_argument("--threads", type=int, default=1)
    p_sel.add_argument("--seed", type=int, default=0)
    p_sel.add_argument("--out", required=True)
    p_sel.add_argument("--importance-csv", default=None)
    p_sel.set_defaults(func=cmd_select)

    p_tab = sub.add_parser("table", help="run an experiment preset grid")
    p_tab.add_argument("--preset", required=True)
    p_tab.add_argument("--scale", default="desk",
                       help="'desk', 'full', or a numeric down-scale factor")
    p_tab.add_argument("--replicates", type=int, default=None)
    p_tab.add_argument("--threads", type=int, default=1)
    p_tab.add_argument("--seed", type=int, default=0)
    p_tab.add_argument("--out", required=True, help="output directory")
    p_tab.set_defaults(func=cmd_table)

    p_cur = sub.add_parser("curves", help="thresholding-function plot data")
    p_cur.add_argument("--penalty-level", type=float, default=1.0)
    p_cur.add_argument("--gamma", type=float, default=1.0)
    p_cur.add_argument("--z-max", type=float, default=5.0)
    p_cur.add_argument("--points", type=int, default=201)
    p_cur.add_argument("--out", required=True)
    p_cur.set_defaults(func=cmd_curves)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, DataError, ValueError, OSError,
            json.JSONDecodeError, jsonschema.ValidationError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
