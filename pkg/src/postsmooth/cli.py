"""Command line front end: smooth, tune, simulate, theory, baseline.

Every command reads and writes CSV files using the column conventions in
csvio (t0.., yhat0.., y0.., x0.., optional "group").  A JSON config file may
supply any long-flag value under its underscored name; explicit flags win.
Outputs are written atomically, so a nonzero exit never leaves a partial
file behind.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from contextlib import nullcontext
from itertools import product

import numpy as np

from .baselines import (
    METHODS,
    default_grid,
    fit_and_predict,
    shrink_to_mean,
)
from .csvio import (
    ColumnSpec,
    format_float,
    parse_float_columns,
    read_table,
    write_table,
)
from .data import IndexedDataset, PredictionSet, SplitAssignment
from .diagnostics import (
    estimate_gamma_beta,
    mse_change_upper_bound,
    optimal_mixing_weight,
    smoothing_gap,
)
from .simulate import (
    BlockCovariance,
    RbfCovariance,
    SimConfig,
    run_sweep,
    write_sweep_csv,
)
from .smoothing import SmootherSpec, nadaraya_watson_matrix, smooth_predictions
from .tuning import (
    DEFAULT_C_GRID,
    DEFAULT_SIGMA_GRID,
    GridSpec,
    _score,
    tune_baseline,
    tune_pes,
)

SPLIT_NAMES = ("train", "validation", "holdout")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            loaded = json.load(handle)
    except OSError as exc:
        raise ValueError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(loaded, dict):
        raise ValueError(f"config {path} must hold a JSON object at top level")
    return loaded


def _get(args, config: dict, name: str, default=None):
    """Flag value if given, else the config entry, else the default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in config:
        return config[name]
    return default


def _require(args, config: dict, name: str):
    value = _get(args, config, name)
    if value is None:
        flag = "--" + name.replace("_", "-")
        raise ValueError(f"missing required parameter {flag} (config key {name!r})")
    return value


def _float_list(value, name: str) -> list[float]:
    if isinstance(value, str):
        parts = [p for p in value.split(",") if p.strip() != ""]
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        parts = [value]
    try:
        return [float(p) for p in parts]
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be a comma-separated list of numbers") from None


def _name_list(value) -> list[str]:
    if isinstance(value, str):
        return [p.strip() for p in value.split(",") if p.strip() != ""]
    return [str(p) for p in value]


def _column_spec(args, config: dict) -> ColumnSpec:
    mapping = {}
    for role, flag in (
        ("index", "index_columns"),
        ("prediction", "prediction_columns"),
        ("label", "label_columns"),
        ("feature", "feature_columns"),
    ):
        value = _get(args, config, flag)
        if value is not None:
            mapping[role] = _name_list(value)
    group = _get(args, config, "group_column")
    if group is not None:
        mapping["group"] = str(group)
    return ColumnSpec.from_mapping(mapping)


def _load_predictions(
    path: str, spec: ColumnSpec, need_labels: bool
) -> tuple[PredictionSet, np.ndarray | None, list, list, object]:
    """Read a predictions CSV; returns (set, groups, header, rows, resolved)."""
    header, rows = read_table(path)
    cols = spec.resolve(header, path)
    if not cols.index:
        raise ValueError(f"{path}: no index columns found (expected t0, t1, ...)")
    if not cols.prediction:
        raise ValueError(
            f"{path}: no prediction columns found (expected yhat0, yhat1, ...)"
        )
    indices = parse_float_columns(header, rows, cols.index, path)
    predictions = parse_float_columns(header, rows, cols.prediction, path)
    labels = None
    if cols.label:
        labels = parse_float_columns(header, rows, cols.label, path)
    elif need_labels:
        raise ValueError(f"{path}: no label columns found (expected y0, y1, ...)")
    groups = None
    if cols.group is not None:
        pos = header.index(cols.group)
        groups = np.array([row[pos] for row in rows])
    return PredictionSet(predictions, indices, labels), groups, header, rows, cols


def _load_dataset(
    path: str, spec: ColumnSpec, need_labels: bool
) -> tuple[IndexedDataset, bool]:
    """Read a baseline CSV; index columns stand in when features are absent.

    Returns the dataset and whether real labels were present.  Files without
    label columns get placeholder zeros that callers must not score against.
    """
    header, rows = read_table(path)
    cols = spec.resolve(header, path)
    if not cols.index:
        raise ValueError(f"{path}: no index columns found (expected t0, t1, ...)")
    indices = parse_float_columns(header, rows, cols.index, path)
    features = (
        parse_float_columns(header, rows, cols.feature, path)
        if cols.feature
        else indices
    )
    labeled = bool(cols.label)
    if cols.label:
        labels = parse_float_columns(header, rows, cols.label, path)
    elif need_labels:
        raise ValueError(f"{path}: no label columns found (expected y0, y1, ...)")
    else:
        labels = np.zeros((len(rows), 1))
    return IndexedDataset(features=features, labels=labels, indices=indices), labeled


def cmd_smooth(args, config: dict) -> int:
    input_path = _require(args, config, "input")
    output_path = _require(args, config, "output")
    sigma = float(_require(args, config, "sigma"))
    mixing_c = float(_require(args, config, "c"))
    spec = SmootherSpec(bandwidth_sigma=sigma, mixing_c=mixing_c)
    pred_set, groups, header, rows, cols = _load_predictions(
        input_path, _column_spec(args, config), need_labels=False
    )
    smoothed = smooth_predictions(pred_set, spec, groups=groups)
    positions = [header.index(name) for name in cols.prediction]
    out_rows = [list(row) for row in rows]
    for i, row in enumerate(out_rows):
        for j, pos in enumerate(positions):
            row[pos] = format_float(smoothed.predictions[i, j])
    write_table(output_path, header, out_rows)
    print(f"smoothed {pred_set.n} rows (sigma={sigma:g}, c={mixing_c:g}) -> {output_path}")
    return 0


def _split_from_column(header, rows, column, path) -> SplitAssignment:
    try:
        pos = header.index(column)
    except ValueError:
        raise ValueError(f"{path}: split column {column!r} not found in header") from None
    buckets = {name: [] for name in SPLIT_NAMES}
    for i, row in enumerate(rows):
        value = row[pos]
        if value not in buckets:
            raise ValueError(
                f"{path}: line {i + 2}: split value {value!r} is not one of "
                f"{SPLIT_NAMES}"
            )
        buckets[value].append(i)
    return SplitAssignment(
        train_rows=np.array(buckets["train"], dtype=np.intp),
        validation_rows=np.array(buckets["validation"], dtype=np.intp),
        holdout_rows=np.array(buckets["holdout"], dtype=np.intp),
    )


def _split_from_fractions(
    n: int, validation_fraction: float, holdout_fraction: float, seed: int
) -> SplitAssignment:
    if not (0.0 < validation_fraction < 1.0) or not (0.0 < holdout_fraction < 1.0):
        raise ValueError("validation and holdout fractions must lie in (0, 1)")
    n_val = max(1, int(round(validation_fraction * n)))
    n_hold = max(1, int(round(holdout_fraction * n)))
    if n_val + n_hold > n:
        raise ValueError(
            f"fractions select {n_val} validation + {n_hold} holdout rows "
            f"from only {n} rows"
        )
    perm = np.random.default_rng(seed).permutation(n)
    return SplitAssignment(
        train_rows=np.sort(perm[n_val + n_hold :]),
        validation_rows=np.sort(perm[:n_val]),
        holdout_rows=np.sort(perm[n_val : n_val + n_hold]),
    )


def cmd_tune(args, config: dict) -> int:
    input_path = _require(args, config, "input")
    output_path = _require(args, config, "output")
    metric = str(_get(args, config, "metric", "mse"))
    seed = int(_get(args, config, "seed", 0))
    pred_set, _, header, rows, _ = _load_predictions(
        input_path, _column_spec(args, config), need_labels=True
    )

    split_column = _get(args, config, "split_column")
    val_frac = _get(args, config, "validation_fraction")
    hold_frac = _get(args, config, "holdout_fraction")
    if split_column is not None and (val_frac is not None or hold_frac is not None):
        raise ValueError("give either --split-column or the fraction flags, not both")
    if split_column is not None:
        split = _split_from_column(header, rows, str(split_column), input_path)
    elif val_frac is not None and hold_frac is not None:
        split = _split_from_fractions(pred_set.n, float(val_frac), float(hold_frac), seed)
    else:
        raise ValueError(
            "no split given: use --split-column NAME or both "
            "--validation-fraction and --holdout-fraction"
        )

    sigma_values = _float_list(
        _get(args, config, "sigma_grid", list(DEFAULT_SIGMA_GRID)), "sigma_grid"
    )
    c_values = _float_list(_get(args, config, "c_grid", list(DEFAULT_C_GRID)), "c_grid")
    robust = not bool(_get(args, config, "non_robust", False))
    grid = GridSpec(sigma_values=tuple(sigma_values), c_values=tuple(c_values), robust=robust)
    scope = str(_get(args, config, "holdout_scope", "transductive"))
    if scope not in ("transductive", "holdout-only"):
        raise ValueError(
            f"holdout_scope must be 'transductive' or 'holdout-only', got {scope!r}"
        )

    report = tune_pes(
        pred_set, split, grid=grid, metric=metric, transductive=scope == "transductive"
    )

    out_rows = []
    for sigma in grid.sigma_values:
        for c in grid.c_values:
            selected = sigma == report.best_sigma and c == report.best_c
            out_rows.append(
                [
                    format_float(sigma),
                    format_float(c),
                    format_float(report.validation_scores[(sigma, c)]),
                    "1" if selected else "",
                ]
            )
    write_table(output_path, ["sigma", "c", "validation_score", "selected"], out_rows)

    print(f"metric: {report.metric}")
    print(f"best_sigma: {format_float(report.best_sigma)}")
    print(f"best_c: {format_float(report.best_c)}")
    print(f"validation_score: {format_float(report.validation_scores[(report.best_sigma, report.best_c)])}")
    print(f"unsmoothed_validation_score: {format_float(report.unsmoothed_validation_score)}")
    print(f"holdout_score: {format_float(report.holdout_score)}")
    print(f"unsmoothed_holdout_score: {format_float(report.unsmoothed_holdout_score)}")
    print(f"report: {len(out_rows)} grid cells -> {output_path}")
    return 0


def _kzz_spec(args, config: dict):
    kind = str(_get(args, config, "kzz_kind", "rbf"))
    variance = float(_get(args, config, "kzz_variance", 1.0))
    if kind == "rbf":
        length_scale = _get(args, config, "kzz_length_scale")
        return RbfCovariance(
            variance=variance,
            length_scale=None if length_scale is None else float(length_scale),
        )
    if kind == "block":
        blocks = _get(args, config, "kzz_blocks")
        if blocks is None:
            raise ValueError("kzz_kind 'block' requires --kzz-blocks")
        return BlockCovariance(num_blocks=int(blocks), variance=variance)
    raise ValueError(f"kzz_kind must be 'rbf' or 'block', got {kind!r}")


def cmd_simulate(args, config: dict) -> int:
    output_path = _require(args, config, "output")
    n = int(_get(args, config, "n", 2000))
    trials = int(_get(args, config, "trials", 10))
    c_sig = float(_get(args, config, "c_sig", 1.0))
    estimator = str(_get(args, config, "estimator", "tls"))
    seed = int(_get(args, config, "seed", 0))
    sigma_x_values = _float_list(_get(args, config, "sigma_x", [0.5]), "sigma_x")
    sigma_y_values = _float_list(_get(args, config, "sigma_y", [0.1]), "sigma_y")
    kzz = _kzz_spec(args, config)

    pes_sigmas = _float_list(
        _get(args, config, "pes_sigma_grid", list(DEFAULT_SIGMA_GRID)), "pes_sigma_grid"
    )
    pes_cs = _float_list(
        _get(args, config, "pes_c_grid", list(DEFAULT_C_GRID)), "pes_c_grid"
    )
    pes_grid = GridSpec(sigma_values=tuple(pes_sigmas), c_values=tuple(pes_cs))

    grid = [
        SimConfig(
            n=n,
            c_sig=c_sig,
            sigma_x=sx,
            sigma_y=sy,
            kzz_spec=kzz,
            estimator=estimator,
            trials=trials,
            seed=seed,
        )
        for sx, sy in product(sigma_x_values, sigma_y_values)
    ]
    results = run_sweep(grid, pes_grid=pes_grid)
    write_sweep_csv(results, output_path)
    failures = sum(1 for r in results if r.error is not None)
    print(f"simulated {len(results)} cells ({failures} failed) -> {output_path}")
    for r in results:
        if r.error is not None:
            print(
                f"cell sigma_x={r.config.sigma_x:g} sigma_y={r.config.sigma_y:g} "
                f"failed: {r.error}",
                file=sys.stderr,
            )
    return 0


def cmd_theory(args, config: dict) -> int:
    input_path = _require(args, config, "input")
    sigma = float(_require(args, config, "sigma"))
    output_path = _get(args, config, "output")
    pred_set, _, _, _, _ = _load_predictions(
        input_path, _column_spec(args, config), need_labels=True
    )
    weights = nadaraya_watson_matrix(pred_set.indices, sigma)
    trials = [(pred_set.labels, pred_set.predictions)]
    gb = estimate_gamma_beta(weights, trials)
    gap = smoothing_gap(weights, trials)
    if gb.applicable:
        c_star = optimal_mixing_weight(gb, gap)
        bound = mse_change_upper_bound(gb, gap, pred_set.n)
        c_star_text, bound_text = format_float(c_star), format_float(bound)
    else:
        c_star_text = bound_text = ""

    pairs = [
        ("sigma", format_float(sigma)),
        ("n", str(pred_set.n)),
        ("gamma", format_float(gb.gamma)),
        ("beta", format_float(gb.beta)),
        ("gamma_plus_beta", format_float(gb.gamma + gb.beta)),
        ("mean_sq_err", format_float(gb.mean_sq_err)),
        ("smoothed_mse_gap", format_float(gap)),
        ("applicable", "yes" if gb.applicable else "no"),
        ("c_star", c_star_text),
        ("mse_change_bound", bound_text),
    ]
    for key, value in pairs:
        print(f"{key}: {value}")
    if output_path is not None:
        write_table(output_path, ["quantity", "value"], [list(p) for p in pairs])
        print(f"wrote {output_path}")
    return 0


def _best_params_text(spec) -> str:
    parts = []
    for key in sorted(spec.hyperparameters):
        value = spec.hyperparameters[key]
        if key == "num_features":
            parts.append(f"{key}={int(value)}")
        else:
            parts.append(f"{key}={format_float(value)}")
    return ";".join(parts)


def cmd_baseline(args, config: dict) -> int:
    train_path = _require(args, config, "train")
    val_path = _require(args, config, "validation")
    hold_path = _require(args, config, "holdout")
    prefix = str(_require(args, config, "output"))
    metric = str(_get(args, config, "metric", "mse"))
    seed = int(_get(args, config, "seed", 0))
    methods = _get(args, config, "method")
    if not methods:
        raise ValueError("at least one --method is required")
    if isinstance(methods, str):
        methods = [methods]
    fittable = tuple(m for m in METHODS if m != "shrink_to_mean")
    for m in methods:
        if m == "shrink_to_mean":
            raise ValueError(
                "shrink_to_mean composes with a base method; pass --shrink-deltas "
                "alongside a fittable --method instead"
            )
        if m not in fittable:
            raise ValueError(f"unknown method {m!r}; expected one of {fittable}")
    deltas_value = _get(args, config, "shrink_deltas")
    deltas = (
        None if deltas_value is None else _float_list(deltas_value, "shrink_deltas")
    )

    columns = _column_spec(args, config)
    train, _ = _load_dataset(train_path, columns, need_labels=True)
    validation, _ = _load_dataset(val_path, columns, need_labels=True)
    holdout, holdout_labeled = _load_dataset(hold_path, columns, need_labels=False)
    train_mean = train.labels.mean(axis=0)

    summary_rows = []
    for method in methods:
        start = time.perf_counter()
        specs = default_grid(method, seed=seed)
        report = tune_baseline(train, validation, specs, metric=metric)
        best = report.best_spec
        predicted_hold = np.asarray(fit_and_predict(best, train, holdout))
        if predicted_hold.ndim == 1:
            predicted_hold = predicted_hold.reshape(-1, 1)
        best_delta_text = ""
        if deltas is not None:
            predicted_val = np.asarray(fit_and_predict(best, train, validation))
            val_pset = PredictionSet(predicted_val, validation.indices, validation.labels)
            best_delta, best_val = None, None
            for delta in deltas:
                shrunk = shrink_to_mean(val_pset, train_mean, delta)
                value = _score(validation.labels, shrunk.predictions, metric)
                if best_delta is None or (
                    value < best_val if metric == "mse" else value > best_val
                ):
                    best_delta, best_val = delta, value
            predicted_hold = (1.0 - best_delta) * predicted_hold + best_delta * train_mean
            best_delta_text = format_float(best_delta)
        wall = time.perf_counter() - start

        d_t = holdout.indices.shape[1]
        d_y = predicted_hold.shape[1]
        pred_header = [f"t{j}" for j in range(d_t)]
        pred_header += [f"yhat{j}" for j in range(d_y)]
        if holdout_labeled:
            pred_header += [f"y{j}" for j in range(holdout.labels.shape[1])]
        pred_rows = []
        for i in range(holdout.n):
            row = [format_float(v) for v in holdout.indices[i]]
            row += [format_float(v) for v in predicted_hold[i]]
            if holdout_labeled:
                row += [format_float(v) for v in holdout.labels[i]]
            pred_rows.append(row)
        pred_path = f"{prefix}_{method}.csv"
        write_table(pred_path, pred_header, pred_rows)

        holdout_score_text = ""
        if holdout_labeled:
            holdout_score_text = format_float(
                _score(holdout.labels, predicted_hold, metric)
            )
        summary_rows.append(
            [
                method,
                str(len(best.hyperparameters)),
                str(len(specs)),
                f"{wall:.3f}",
                format_float(report.best_score),
                holdout_score_text,
                best_delta_text,
                _best_params_text(best),
            ]
        )
        print(
            f"{method}: validation={format_float(report.best_score)} "
            f"holdout={holdout_score_text or 'n/a'} -> {pred_path}"
        )

    summary_path = f"{prefix}_summary.csv"
    write_table(
        summary_path,
        [
            "method",
            "n_hyperparams",
            "n_configs",
            "wall_clock_s",
            "validation_score",
            "holdout_score",
            "shrink_delta",
            "best_params",
        ],
        summary_rows,
    )
    print(f"summary -> {summary_path}")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="random seed (default 0)")
    parser.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="cap BLAS thread pools at this many threads")
    parser.add_argument("--config", default=argparse.SUPPRESS,
                        help="JSON file of parameter defaults; flags win")


def _add_column_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--index-columns", dest="index_columns",
                        help="comma-separated index column names (default t0, t1, ...)")
    parser.add_argument("--prediction-columns", dest="prediction_columns",
                        help="comma-separated prediction column names (default yhat0, ...)")
    parser.add_argument("--label-columns", dest="label_columns",
                        help="comma-separated label column names (default y0, ...)")
    parser.add_argument("--feature-columns", dest="feature_columns",
                        help="comma-separated feature column names (default x0, ...)")
    parser.add_argument("--group-column", dest="group_column",
                        help="column that partitions rows into independent blocks")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="postsmooth",
        description="Smooth precomputed predictions along their index variables.",
    )
    _add_common(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("smooth", help="apply a fixed shrinkage smoother to a CSV")
    _add_common(p)
    _add_column_flags(p)
    p.add_argument("--input", help="predictions CSV")
    p.add_argument("--output", help="smoothed predictions CSV")
    p.add_argument("--sigma", type=float, help="kernel bandwidth > 0")
    p.add_argument("--c", type=float, help="mixing weight in [0, 1]")
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("tune", help="grid-search sigma and c on a validation split")
    _add_common(p)
    _add_column_flags(p)
    p.add_argument("--input", help="predictions CSV with labels")
    p.add_argument("--output", help="per-cell report CSV")
    p.add_argument("--split-column", dest="split_column",
                   help="column with values train/validation/holdout")
    p.add_argument("--validation-fraction", dest="validation_fraction", type=float)
    p.add_argument("--holdout-fraction", dest="holdout_fraction", type=float)
    p.add_argument("--sigma-grid", dest="sigma_grid",
                   help="comma-separated bandwidths")
    p.add_argument("--c-grid", dest="c_grid", help="comma-separated mixing weights")
    p.add_argument("--metric", choices=["mse", "r2"])
    p.add_argument("--holdout-scope", dest="holdout_scope",
                   choices=["transductive", "holdout-only"],
                   help="smooth holdout against validation+holdout rows or alone")
    p.add_argument("--non-robust", dest="non_robust", action="store_const", const=True,
                   help="allow a c grid without 0")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("simulate", help="run the latent smooth-signal study")
    _add_common(p)
    p.add_argument("--output", help="sweep CSV")
    p.add_argument("--n", type=int, help="points per draw (default 2000)")
    p.add_argument("--trials", type=int, help="trials per cell (default 10)")
    p.add_argument("--c-sig", dest="c_sig", type=float, help="signal coefficient")
    p.add_argument("--sigma-x", dest="sigma_x", help="comma-separated feature-noise scales")
    p.add_argument("--sigma-y", dest="sigma_y", help="comma-separated label-noise scales")
    p.add_argument("--estimator", choices=["tls", "ols"])
    p.add_argument("--kzz-kind", dest="kzz_kind", choices=["rbf", "block"])
    p.add_argument("--kzz-variance", dest="kzz_variance", type=float)
    p.add_argument("--kzz-length-scale", dest="kzz_length_scale", type=float)
    p.add_argument("--kzz-blocks", dest="kzz_blocks", type=int)
    p.add_argument("--pes-sigma-grid", dest="pes_sigma_grid")
    p.add_argument("--pes-c-grid", dest="pes_c_grid")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("theory", help="estimate gamma, beta, c*, and the MSE bound")
    _add_common(p)
    _add_column_flags(p)
    p.add_argument("--input", help="predictions CSV with labels")
    p.add_argument("--sigma", type=float, help="kernel bandwidth for the weights")
    p.add_argument("--output", help="optional quantity/value CSV")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("baseline", help="tune reference regressors and export predictions")
    _add_common(p)
    _add_column_flags(p)
    p.add_argument("--train", help="labeled training CSV")
    p.add_argument("--validation", help="labeled validation CSV")
    p.add_argument("--holdout", help="holdout CSV (labels optional)")
    p.add_argument("--method", action="append",
                   help="baseline method, repeatable: ridge, random_features, gpr, laprls, hem")
    p.add_argument("--output", help="output path prefix")
    p.add_argument("--metric", choices=["mse", "r2"])
    p.add_argument("--shrink-deltas", dest="shrink_deltas",
                   help="comma-separated deltas; composes shrink-to-mean on the best fit")
    p.set_defaults(func=cmd_baseline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(getattr(args, "config", None))
        threads = _get(args, config, "threads")
        if threads is not None:
            from threadpoolctl import threadpool_limits

            limiter = threadpool_limits(limits=int(threads))
        else:
            limiter = nullcontext()
        with limiter:
            return args.func(args, config)
    except (ValueError, np.linalg.LinAlgError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
