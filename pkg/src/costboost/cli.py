"""Command-line surface tying the pipeline together.

Subcommands
-----------
  simulate    draw a synthetic train/test pair with known true quantiles
  train       fit a cost-sensitive boosted model with CV iteration selection
  impute      score a predictor-only CSV with a trained model
  aggregate   combine observed and imputed values into per-stratum totals
  diagnose    partial dependence and (baseline) relative influence reports

Every command writes its outputs plus one ``manifest.json`` (config
snapshot, input digests, seed, output list) into ``--out-dir``; reruns
with identical inputs and flags produce byte-identical outputs.  Exit
status is 0 only when all outputs were written; any failure prints a
single ``error: ...`` line on stderr.

Example
-------
  costboost simulate --out-dir sim
  costboost train sim/train.csv --response response --cost-ratio 3:1 \
      --max-trees 400 --learning-rate 0.02 --folds 5 --out-dir run
  costboost impute run/model.json sim/test.csv --out-dir scored
  costboost diagnose run/model.json sim/train.csv --response response \
      --skip-baseline --out-dir diag
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field, replace
from typing import Optional

from . import __version__
from ._seeds import SIM_TEST, SIM_TRAIN, derive_seed
from .boosting import load_model, predict, save_model
from .data import CsvSchema, TrainConfig, cost_ratio_to_alpha, load_csv, save_csv
from .diagnostics import baseline_influence, partial_dependence, relative_influence
from .model_selection import train_with_selection
from .synth import SynthSpec, generate

DEFAULT_SEED = 17

__all__ = ["main", "entrypoint", "RunManifest", "DEFAULT_SEED"]


# ---------------------------------------------------------------------------
# manifest plumbing

def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _file_entry(path: str) -> dict:
    return {
        "path": os.path.basename(path),
        "sha256": _sha256(path),
        "bytes": os.path.getsize(path),
    }


@dataclass
class RunManifest:
    """Audit record of one command run, written last into the output dir."""

    command: str
    seed: Optional[int]
    config: dict
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)

    def add_input(self, path: str) -> None:
        entry = _file_entry(path)
        entry["path"] = path
        self.inputs.append(entry)

    def add_output(self, path: str) -> None:
        self.outputs.append(path)

    def write(self, out_dir: str) -> str:
        payload = {
            "tool": "costboost",
            "version": __version__,
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": [_file_entry(p) for p in self.outputs],
        }
        path = os.path.join(out_dir, "manifest.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
        return path


def _ensure_out_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _write_table(path: str, header: list, rows: list) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _num(value: float) -> str:
    return repr(float(value))


# ---------------------------------------------------------------------------
# shared flag groups

def _add_schema_flags(parser: argparse.ArgumentParser, response_required: bool) -> None:
    parser.add_argument("--response", required=response_required,
                        help="name of the response column")
    parser.add_argument("--weights-column", default=None,
                        help="optional population-weight column (default: unit weights)")
    parser.add_argument("--id-column", default=None,
                        help="optional row-identifier column (default: row number)")
    parser.add_argument("--stratum-column", default=None,
                        help="optional stratum label column")
    parser.add_argument("--predictors", default=None,
                        help="comma-separated predictor columns "
                             "(default: every column without another role)")


def _schema_from_args(args) -> CsvSchema:
    predictors = None
    if args.predictors:
        predictors = tuple(c.strip() for c in args.predictors.split(",") if c.strip())
    return CsvSchema(
        response=args.response,
        weight=args.weights_column,
        row_id=args.id_column,
        stratum=args.stratum_column,
        predictors=predictors,
    )


def _parse_cost_ratio(text: str) -> float:
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError(f"cost ratio must look like U:V, got {text!r}")
    try:
        under, over = (float(p) for p in parts)
    except ValueError:
        raise ValueError(f"cost ratio must be two numbers U:V, got {text!r}") from None
    return cost_ratio_to_alpha(under, over)


def _resolve_alpha(args) -> float:
    if args.alpha is not None and args.cost_ratio is not None:
        raise ValueError("--alpha and --cost-ratio are mutually exclusive")
    if args.alpha is not None:
        return float(args.alpha)
    if args.cost_ratio is not None:
        return _parse_cost_ratio(args.cost_ratio)
    raise ValueError("one of --alpha or --cost-ratio is required")


# ---------------------------------------------------------------------------
# simulate

def cmd_simulate(args) -> int:
    out_dir = _ensure_out_dir(args.out_dir)
    common = dict(
        n_predictors=args.predictors,
        noise=args.noise,
        noise_scale=args.noise_scale,
        tail_shape=args.tail_shape,
        scale_slope=args.scale_slope,
        count_mode=args.count_mode,
    )
    train_spec = SynthSpec(n_rows=args.rows, seed=derive_seed(args.seed, SIM_TRAIN),
                           id_prefix="s", **common)
    test_spec = SynthSpec(n_rows=args.test_rows, seed=derive_seed(args.seed, SIM_TEST),
                          id_prefix="u", **common)
    train_data, _ = generate(train_spec)
    test_data, oracle = generate(test_spec)

    alphas = args.oracle_alpha or [0.75]
    extra = {
        f"oracle_{alpha:g}": oracle(test_data.predictors, alpha) for alpha in alphas
    }

    train_path = os.path.join(out_dir, "train.csv")
    test_path = os.path.join(out_dir, "test.csv")
    save_csv(train_data, train_path)
    save_csv(test_data, test_path, extra_columns=extra)

    manifest = RunManifest(
        command="simulate",
        seed=args.seed,
        config={
            "rows": args.rows, "test_rows": args.test_rows,
            "predictors": args.predictors, "noise": args.noise,
            "noise_scale": args.noise_scale, "tail_shape": args.tail_shape,
            "scale_slope": args.scale_slope, "count_mode": args.count_mode,
            "oracle_alphas": [float(a) for a in alphas],
        },
    )
    manifest.add_output(train_path)
    manifest.add_output(test_path)
    manifest.write(out_dir)
    print(f"wrote {train_path} ({args.rows} rows) and {test_path} ({args.test_rows} rows)")
    return 0


# ---------------------------------------------------------------------------
# train

def cmd_train(args) -> int:
    alpha = _resolve_alpha(args)
    cfg = TrainConfig(
        alpha=alpha,
        learning_rate=args.learning_rate,
        max_trees=args.max_trees,
        splits_per_tree=args.splits,
        min_node_size=args.min_node,
        subsample_fraction=args.subsample,
        cv_folds=args.folds,
        seed=args.seed,
    )
    schema = _schema_from_args(args)
    data = load_csv(args.data, schema)
    if data.response is None:
        raise ValueError("--response is required for training")

    out_dir = _ensure_out_dir(args.out_dir)
    model, cv = train_with_selection(data, cfg)

    model_path = os.path.join(out_dir, "model.json")
    save_model(model, model_path)
    curve_path = os.path.join(out_dir, "cv_curve.csv")
    _write_table(curve_path, ["iteration", "mean_cv_deviance"],
                 [(t, _num(v)) for t, v in cv.as_table()])

    config = cfg.as_dict()
    if args.cost_ratio is not None:
        config["cost_ratio"] = args.cost_ratio
    manifest = RunManifest(command="train", seed=args.seed, config=config)
    manifest.add_input(args.data)
    manifest.add_output(model_path)
    manifest.add_output(curve_path)

    if not args.no_plots:
        from .plots import save_cv_curve_plot

        plot_path = os.path.join(out_dir, "cv_curve.png")
        save_cv_curve_plot(cv.cv_curve, cv.best_iterations, plot_path)
        manifest.add_output(plot_path)

    manifest.write(out_dir)
    final_dev = float(model.training_meta.deviance_trace[-1])
    print(f"selected iterations: {cv.best_iterations}")
    print(f"final training deviance: {final_dev:.6g}")
    return 0


# ---------------------------------------------------------------------------
# impute

def cmd_impute(args) -> int:
    model = load_model(args.model)
    schema = CsvSchema(
        row_id=args.id_column,
        stratum=args.stratum_column,
        predictors=model.predictor_names,
    )
    data = load_csv(args.data, schema)
    values = predict(model, data, n_trees=args.n_trees)

    out_dir = _ensure_out_dir(args.out_dir)
    pred_path = os.path.join(out_dir, "predictions.csv")
    header = ["row_id", "imputed_value"]
    if data.stratum is not None:
        header.append("stratum")
    rows = []
    for i in range(data.n_rows):
        row = [data.row_ids[i], _num(values[i])]
        if data.stratum is not None:
            row.append(data.stratum[i])
        rows.append(row)
    _write_table(pred_path, header, rows)

    manifest = RunManifest(
        command="impute",
        seed=None,
        config={"n_trees": args.n_trees if args.n_trees is not None else model.n_trees},
    )
    manifest.add_input(args.model)
    manifest.add_input(args.data)
    manifest.add_output(pred_path)
    manifest.write(out_dir)
    print(f"imputed {data.n_rows} rows -> {pred_path}")
    return 0


# ---------------------------------------------------------------------------
# aggregate

def _read_value_table(path: str, id_col: str, value_col: str,
                      stratum_col: Optional[str]):
    """Rows of (row_id, value, stratum) from a delimited file."""
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        for col in (id_col, value_col):
            if col not in fields:
                raise ValueError(f"{path}: missing column {col!r}")
        use_stratum = stratum_col if stratum_col in fields else None
        if stratum_col is not None and use_stratum is None and stratum_col != "stratum":
            raise ValueError(f"{path}: missing stratum column {stratum_col!r}")
        out = []
        for line_no, rec in enumerate(reader, start=2):
            raw = (rec[value_col] or "").strip()
            try:
                value = float(raw)
            except ValueError:
                raise ValueError(
                    f"{path}: non-numeric value {raw!r} in column {value_col!r}, line {line_no}"
                ) from None
            if not math.isfinite(value):
                raise ValueError(f"{path}: non-finite value at line {line_no}")
            stratum = rec[use_stratum] if use_stratum else "(all)"
            out.append((rec[id_col], value, stratum))
    return out


def cmd_aggregate(args) -> int:
    imputed = _read_value_table(
        args.imputed, args.imputed_id_column, args.imputed_value_column,
        args.imputed_stratum_column,
    )
    observed = []
    if args.observed:
        if not args.observed_value_column:
            raise ValueError("--observed-value-column is required with --observed")
        observed = _read_value_table(
            args.observed, args.observed_id_column, args.observed_value_column,
            args.observed_stratum_column,
        )

    imputed_ids = {r[0] for r in imputed}
    observed_ids = {r[0] for r in observed}
    overlap = imputed_ids & observed_ids
    if overlap:
        sample = ", ".join(sorted(overlap)[:5])
        raise ValueError(
            f"{len(overlap)} row_ids appear in both observed and imputed inputs ({sample} ...)"
        )

    strata = sorted({r[2] for r in imputed} | {r[2] for r in observed})
    rows = []
    for stratum in strata:
        obs = [v for rid, v, s in observed if s == stratum]
        imp = [v for rid, v, s in imputed if s == stratum]
        rows.append((stratum, len(obs), math.fsum(obs), len(imp), math.fsum(imp)))
    total_obs = math.fsum(r[2] for r in rows)
    total_imp = math.fsum(r[4] for r in rows)
    rows.append(("TOTAL", sum(r[1] for r in rows), total_obs,
                 sum(r[3] for r in rows), total_imp))

    out_dir = _ensure_out_dir(args.out_dir)
    totals_path = os.path.join(out_dir, "totals.csv")
    _write_table(
        totals_path,
        ["stratum", "n_observed", "observed_total", "n_imputed", "imputed_total", "total"],
        [(s, no, _num(ot), ni, _num(it), _num(ot + it)) for s, no, ot, ni, it in rows],
    )

    manifest = RunManifest(command="aggregate", seed=None, config={})
    manifest.add_input(args.imputed)
    if args.observed:
        manifest.add_input(args.observed)
    manifest.add_output(totals_path)
    manifest.write(out_dir)
    print(f"wrote {totals_path} ({len(strata)} strata)")
    return 0


# ---------------------------------------------------------------------------
# diagnose

def cmd_diagnose(args) -> int:
    model = load_model(args.model)
    schema = CsvSchema(
        response=args.response,
        weight=args.weights_column,
        row_id=args.id_column,
        stratum=args.stratum_column,
        predictors=model.predictor_names,
    )
    data = load_csv(args.data, schema)
    out_dir = _ensure_out_dir(args.out_dir)

    grids = [
        partial_dependence(model, name, data, n_points=args.pd_points)
        for name in model.predictor_names
    ]
    pd_path = os.path.join(out_dir, "partial_dependence.csv")
    pd_rows = []
    for g in grids:
        pd_rows.extend(
            (g.predictor, _num(x), _num(v)) for x, v in zip(g.grid, g.response)
        )
    _write_table(pd_path, ["predictor", "grid_value", "pd_value"], pd_rows)

    deciles_path = os.path.join(out_dir, "pd_deciles.csv")
    decile_rows = []
    for g in grids:
        decile_rows.extend(
            (g.predictor, pct, _num(v))
            for pct, v in zip(range(10, 100, 10), g.deciles)
        )
    _write_table(deciles_path, ["predictor", "percentile", "value"], decile_rows)

    report = None
    if args.skip_baseline:
        empirical = relative_influence(model)
        influence_header = ["predictor", "empirical"]
        influence_rows = [
            (name, _num(empirical[name])) for name in model.predictor_names
        ]
    else:
        if data.response is None:
            raise ValueError("--response is required to compute baseline influence")
        cfg = model.training_meta.config
        if args.baseline_max_trees is not None:
            cfg = replace(cfg, max_trees=args.baseline_max_trees)
        report = baseline_influence(data, cfg, args.baseline_replicates)
        empirical = report.empirical
        sd = report.baseline_sd()
        influence_header = ["predictor", "empirical", "baseline_mean", "baseline_sd"]
        influence_rows = [
            (name, _num(empirical[name]), _num(report.baseline_mean[name]), _num(sd[name]))
            for name in model.predictor_names
        ]
    influence_path = os.path.join(out_dir, "influence.csv")
    _write_table(influence_path, influence_header, influence_rows)

    manifest = RunManifest(
        command="diagnose",
        seed=model.training_meta.seed,
        config={
            "pd_points": args.pd_points,
            "skip_baseline": args.skip_baseline,
            "baseline_replicates": None if args.skip_baseline else args.baseline_replicates,
            "baseline_max_trees": args.baseline_max_trees,
            "model_config": model.training_meta.config.as_dict(),
        },
    )
    manifest.add_input(args.model)
    manifest.add_input(args.data)
    manifest.add_output(pd_path)
    manifest.add_output(deciles_path)
    manifest.add_output(influence_path)

    if not args.no_plots:
        from .plots import save_influence_plot, save_pd_plot

        for g in grids:
            plot_path = os.path.join(out_dir, f"pd_{g.predictor}.png")
            save_pd_plot(g.predictor, g.grid, g.response, g.deciles, plot_path)
            manifest.add_output(plot_path)
        names = list(model.predictor_names)
        influence_plot = os.path.join(out_dir, "influence.png")
        if report is None:
            save_influence_plot(names, [empirical[n] for n in names], path=influence_plot)
        else:
            sd = report.baseline_sd()
            save_influence_plot(
                names,
                [empirical[n] for n in names],
                baseline_mean=[report.baseline_mean[n] for n in names],
                baseline_sd=[sd[n] for n in names],
                path=influence_plot,
            )
        manifest.add_output(influence_plot)

    manifest.write(out_dir)
    print(f"wrote diagnostics for {len(grids)} predictors -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="costboost",
        description="Cost-sensitive stochastic gradient boosting for quantile "
                    "estimation and small-area imputation.",
    )
    parser.add_argument("--version", action="version", version=f"costboost {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic train/test pair")
    p.add_argument("--rows", type=int, default=5000)
    p.add_argument("--test-rows", type=int, default=5000)
    p.add_argument("--predictors", type=int, default=3)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--noise", choices=["lomax", "laplace"], default="lomax")
    p.add_argument("--noise-scale", type=float, default=0.25)
    p.add_argument("--tail-shape", type=float, default=2.5)
    p.add_argument("--scale-slope", type=float, default=2.0)
    p.add_argument("--count-mode", action="store_true",
                   help="floor the response at zero and round it")
    p.add_argument("--oracle-alpha", type=float, action="append",
                   help="emit a true-quantile column in the test file "
                        "(repeatable; default 0.75)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train a model with CV iteration selection")
    p.add_argument("data", help="training CSV with a response column")
    p.add_argument("--alpha", type=float, default=None,
                   help="asymmetry parameter in (0, 1)")
    p.add_argument("--cost-ratio", default=None, metavar="U:V",
                   help="under:over misestimation costs, e.g. 3:1 (alpha = U/(U+V))")
    p.add_argument("--learning-rate", type=float, default=0.001)
    p.add_argument("--max-trees", type=int, default=6000)
    p.add_argument("--splits", type=int, default=10)
    p.add_argument("--min-node", type=int, default=5)
    p.add_argument("--subsample", type=float, default=0.5)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    _add_schema_flags(p, response_required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("impute", help="score rows with a trained model")
    p.add_argument("model", help="model file from `costboost train`")
    p.add_argument("data", help="CSV holding the model's predictor columns")
    p.add_argument("--n-trees", type=int, default=None,
                   help="use only the first N trees (0 = initial constant)")
    p.add_argument("--id-column", default=None)
    p.add_argument("--stratum-column", default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("aggregate", help="stratum totals from observed + imputed values")
    p.add_argument("--imputed", required=True,
                   help="predictions CSV (from `costboost impute`)")
    p.add_argument("--imputed-id-column", default="row_id")
    p.add_argument("--imputed-value-column", default="imputed_value")
    p.add_argument("--imputed-stratum-column", default="stratum")
    p.add_argument("--observed", default=None,
                   help="optional CSV of observed values for sampled rows")
    p.add_argument("--observed-id-column", default="row_id")
    p.add_argument("--observed-value-column", default=None)
    p.add_argument("--observed-stratum-column", default="stratum")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("diagnose", help="partial dependence and influence reports")
    p.add_argument("model", help="model file from `costboost train`")
    p.add_argument("data", help="training CSV the model was fit on")
    p.add_argument("--pd-points", type=int, default=100)
    p.add_argument("--baseline-replicates", type=int, default=50)
    p.add_argument("--skip-baseline", action="store_true",
                   help="emit empirical influence only (no retraining)")
    p.add_argument("--baseline-max-trees", type=int, default=None,
                   help="cap trees during baseline retraining (desk-scale runs)")
    p.add_argument("--response", default=None,
                   help="response column (required unless --skip-baseline)")
    p.add_argument("--weights-column", default=None)
    p.add_argument("--id-column", default=None)
    p.add_argument("--stratum-column", default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_diagnose)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


def entrypoint(argv=None) -> int:
    try:
        return main(argv)
    except BrokenPipeError:
        return 1
    except (ValueError, OSError, KeyError) as exc:
        message = " ".join(str(exc).split())
        print(f"error: {message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(entrypoint())
