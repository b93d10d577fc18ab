"""Stochastic gradient boosting under the asymmetric absolute loss.

Each iteration computes the negative gradient of the loss at the current
fit for every row, draws a seeded simple random sample of rows without
replacement, fits a regression tree to the sampled gradients, estimates
terminal corrections as weighted alpha-quantiles of the sampled residuals,
and advances the running fit of ALL rows by ``learning_rate`` times the
correction of the terminal each row routes to.  Rows outside the sample
receive their routed correction too, which is what lets the final model
score arbitrary inputs.

Population weights enter the quantile computations (initial value and
terminal estimates), not the subsample draw.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._seeds import SUBSAMPLE, derive_rng
from .data import Dataset, TrainConfig
from .loss import QuantileLossSpec, deviance, initial_value, negative_gradient
from .tree import RegressionTree, fit_tree, leaf_values

__all__ = ["BoostedModel", "TrainingMeta", "train", "predict", "save_model", "load_model"]

MODEL_FORMAT = "costboost-model"
MODEL_FORMAT_VERSION = 1


@dataclass
class TrainingMeta:
    seed: int
    config: TrainConfig
    deviance_trace: np.ndarray
    stopped_early: bool = False


@dataclass
class BoostedModel:
    """An initial constant plus a shrunken sum of tree corrections.

    The estimate at x is ``f0 + learning_rate * sum_t rho_t(x)`` over the
    first ``n_trees`` trees, which approximates the conditional
    alpha-quantile of the response.
    """

    f0: float
    alpha: float
    learning_rate: float
    trees: list
    predictor_names: tuple
    training_meta: TrainingMeta

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def train(data: Dataset, cfg: TrainConfig) -> BoostedModel:
    """Run the boosting loop on ``data`` and return the fitted model.

    Deterministic given (data, cfg): the subsample at iteration t comes
    from a stream keyed by (seed, t), so earlier draws never depend on
    ``max_trees``.  Training runs the full budget unless the training
    deviance hits exactly zero, after which every further tree would be a
    degenerate zero constant.
    """
    if data.response is None:
        raise ValueError("training data has no response column")
    if cfg.max_trees < 1:
        raise ValueError("max_trees must be >= 1")
    spec = QuantileLossSpec(cfg.alpha)
    X = data.predictors
    y = data.response
    w = data.weights
    n = data.n_rows
    n_prime = cfg.subsample_size(n)

    f0 = initial_value(y, w, spec)
    fit = np.full(n, f0)
    trees: list = []
    trace: list = []
    stopped_early = False
    # presorted predictor orders; each iteration restricts them to the
    # subsample by a stable filter, which matches argsort of the subsample
    presort = [np.argsort(X[:, j], kind="stable") for j in range(X.shape[1])]
    member = np.zeros(n, dtype=bool)
    local = np.empty(n, dtype=np.intp)
    for t in range(1, cfg.max_trees + 1):
        z = negative_gradient(y, fit, w, spec)
        rng = derive_rng(cfg.seed, SUBSAMPLE, t)
        sample = np.sort(rng.permutation(n)[:n_prime])
        member[:] = False
        member[sample] = True
        local[sample] = np.arange(n_prime)
        orders = [local[ps[member[ps]]] for ps in presort]
        tree = fit_tree(
            X[sample], z[sample], y[sample] - fit[sample], w[sample], cfg, spec,
            sort_orders=orders,
        )
        trees.append(tree)
        fit = fit + cfg.learning_rate * leaf_values(tree, X)
        dev = deviance(y, fit, w, spec)
        trace.append(dev)
        if dev == 0.0:
            stopped_early = t < cfg.max_trees
            break

    meta = TrainingMeta(
        seed=cfg.seed,
        config=cfg,
        deviance_trace=np.asarray(trace),
        stopped_early=stopped_early,
    )
    return BoostedModel(
        f0=f0,
        alpha=cfg.alpha,
        learning_rate=cfg.learning_rate,
        trees=trees,
        predictor_names=tuple(data.predictor_names),
        training_meta=meta,
    )


def _align_predictors(model: BoostedModel, data: Dataset) -> np.ndarray:
    """Columns of ``data`` in model order; names must match exactly."""
    if set(data.predictor_names) != set(model.predictor_names):
        missing = sorted(set(model.predictor_names) - set(data.predictor_names))
        extra = sorted(set(data.predictor_names) - set(model.predictor_names))
        parts = []
        if missing:
            parts.append(f"missing {missing}")
        if extra:
            parts.append(f"unexpected {extra}")
        raise ValueError(
            f"predictor schema mismatch: {'; '.join(parts)} "
            f"(model expects {len(model.predictor_names)} columns)"
        )
    if data.predictor_names == model.predictor_names:
        return data.predictors
    order = [data.predictor_names.index(name) for name in model.predictor_names]
    return data.predictors[:, order]


def predict(model: BoostedModel, data: Dataset, n_trees: Optional[int] = None) -> np.ndarray:
    """Fitted values for every row of ``data``.

    Accumulates tree corrections in training order, so scoring the
    training rows with all trees reproduces the in-loop fit bit for bit.
    ``n_trees`` truncates the ensemble (0 returns the constant f0).
    """
    if n_trees is None:
        n_trees = model.n_trees
    if not (0 <= n_trees <= model.n_trees):
        raise ValueError(f"n_trees must lie in [0, {model.n_trees}], got {n_trees}")
    X = _align_predictors(model, data)
    fit = np.full(data.n_rows, model.f0)
    for tree in model.trees[:n_trees]:
        fit = fit + model.learning_rate * leaf_values(tree, X)
    return fit


def _tree_to_nodes(tree: RegressionTree) -> list:
    nodes = []
    for k in range(tree.n_nodes):
        if tree.predictor[k] < 0:
            nodes.append({
                "rho": float(tree.rho[k]),
                "n_rows": int(tree.n_rows[k]),
                "weight_mass": float(tree.weight_mass[k]),
            })
        else:
            nodes.append({
                "predictor": int(tree.predictor[k]),
                "threshold": float(tree.threshold[k]),
                "left": int(tree.left[k]),
                "right": int(tree.right[k]),
                "weight_fraction_left": float(tree.weight_fraction_left[k]),
                "improvement": float(tree.improvement[k]),
                "n_rows": int(tree.n_rows[k]),
                "weight_mass": float(tree.weight_mass[k]),
            })
    return nodes


def _tree_from_nodes(nodes: list) -> RegressionTree:
    count = len(nodes)
    predictor = np.full(count, -1, dtype=np.int32)
    threshold = np.full(count, np.nan)
    left = np.full(count, -1, dtype=np.int32)
    right = np.full(count, -1, dtype=np.int32)
    wfl = np.full(count, np.nan)
    improvement = np.zeros(count)
    rho = np.full(count, np.nan)
    n_rows = np.zeros(count, dtype=np.int32)
    weight_mass = np.zeros(count)
    for k, node in enumerate(nodes):
        n_rows[k] = node["n_rows"]
        weight_mass[k] = node["weight_mass"]
        if "rho" in node:
            rho[k] = node["rho"]
        else:
            predictor[k] = node["predictor"]
            threshold[k] = node["threshold"]
            left[k] = node["left"]
            right[k] = node["right"]
            wfl[k] = node["weight_fraction_left"]
            improvement[k] = node["improvement"]
    return RegressionTree(
        predictor=predictor, threshold=threshold, left=left, right=right,
        weight_fraction_left=wfl, improvement=improvement, rho=rho,
        n_rows=n_rows, weight_mass=weight_mass,
    )


def save_model(model: BoostedModel, path: str) -> None:
    """Write the model as versioned JSON; floats round-trip exactly."""
    payload = {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "f0": float(model.f0),
        "alpha": float(model.alpha),
        "learning_rate": float(model.learning_rate),
        "predictor_names": list(model.predictor_names),
        "config": model.training_meta.config.as_dict(),
        "seed": int(model.training_meta.seed),
        "stopped_early": bool(model.training_meta.stopped_early),
        "deviance_trace": [float(v) for v in model.training_meta.deviance_trace],
        "trees": [{"nodes": _tree_to_nodes(t)} for t in model.trees],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_model(path: str) -> BoostedModel:
    """Read a model written by :func:`save_model`.

    Raises a ValueError naming the byte offset for malformed or truncated
    files and rejects unknown format versions.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: malformed model file at byte {exc.pos}: {exc.msg}") from None
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} file")
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(
            f"{path}: unsupported format version {payload.get('format_version')!r} "
            f"(expected {MODEL_FORMAT_VERSION})"
        )
    cfg = TrainConfig.from_dict(payload["config"])
    meta = TrainingMeta(
        seed=payload["seed"],
        config=cfg,
        deviance_trace=np.asarray(payload["deviance_trace"], dtype=float),
        stopped_early=bool(payload["stopped_early"]),
    )
    return BoostedModel(
        f0=float(payload["f0"]),
        alpha=float(payload["alpha"]),
        learning_rate=float(payload["learning_rate"]),
        trees=[_tree_from_nodes(entry["nodes"]) for entry in payload["trees"]],
        predictor_names=tuple(payload["predictor_names"]),
        training_meta=meta,
    )
