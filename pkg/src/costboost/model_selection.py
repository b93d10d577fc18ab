"""Iteration selection by k-fold cross-validation on the held-out deviance.

Rows are partitioned into near-equal folds by a seeded shuffle.  Each fold
trains on its complement (with a derived seed) and is scored at every
iteration by staged prediction; the curve is the weight-mass-weighted mean
of the fold curves, which equals the pooled held-out deviance.  The
selected iteration count is the argmin, ties going to fewer trees.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ._seeds import CV_ASSIGN, CV_FOLD, derive_rng, derive_seed
from .boosting import BoostedModel, train
from .data import Dataset, TrainConfig
from .loss import QuantileLossSpec
from .tree import leaf_values

__all__ = ["CvResult", "cross_validate", "train_with_selection", "staged_deviance"]


@dataclass
class CvResult:
    cv_curve: np.ndarray        # mean held-out deviance at t = 1..max_trees
    best_iterations: int
    fold_assignments: np.ndarray

    def as_table(self) -> list:
        """(iteration, mean_cv_deviance) rows for export."""
        return [(t + 1, float(v)) for t, v in enumerate(self.cv_curve)]


def staged_deviance(model: BoostedModel, X: np.ndarray, y: np.ndarray,
                    w: np.ndarray, n_stages: int) -> np.ndarray:
    """Held-out deviance after each of the first ``n_stages`` iterations.

    Stages beyond the model's tree count repeat the last value (training
    that stopped early adds only zero corrections afterwards).
    """
    alpha = model.alpha
    w_total = np.sum(w)
    fit = np.full(y.size, model.f0)
    out = np.empty(n_stages)
    last = np.nan
    for t in range(min(n_stages, model.n_trees)):
        fit = fit + model.learning_rate * leaf_values(model.trees[t], X)
        d = y - fit
        factor = np.where(d > 0.0, alpha, 1.0 - alpha)
        last = float(np.sum(w * np.abs(d) * factor) / w_total)
        out[t] = last
    if model.n_trees < n_stages:
        if model.n_trees == 0:
            d = y - fit
            factor = np.where(d > 0.0, alpha, 1.0 - alpha)
            last = float(np.sum(w * np.abs(d) * factor) / w_total)
        out[model.n_trees:] = last
    return out


def cross_validate(data: Dataset, cfg: TrainConfig) -> CvResult:
    """Mean held-out deviance per iteration and the best iteration count."""
    if data.response is None:
        raise ValueError("cross-validation requires a response column")
    n = data.n_rows
    k = cfg.cv_folds
    if k > n:
        raise ValueError(f"cannot make {k} folds from {n} rows")
    QuantileLossSpec(cfg.alpha)  # validate early

    rng = derive_rng(cfg.seed, CV_ASSIGN)
    shuffled = rng.permutation(n)
    fold_of = np.empty(n, dtype=np.int32)
    fold_of[shuffled] = np.arange(n, dtype=np.int32) % k

    curves = np.empty((k, cfg.max_trees))
    masses = np.empty(k)
    for fold in range(k):
        held = np.flatnonzero(fold_of == fold)
        kept = np.flatnonzero(fold_of != fold)
        fold_cfg = replace(cfg, seed=derive_seed(cfg.seed, CV_FOLD, fold))
        model = train(data.take(kept), fold_cfg)
        curves[fold] = staged_deviance(
            model,
            data.predictors[held],
            data.response[held],
            data.weights[held],
            cfg.max_trees,
        )
        masses[fold] = np.sum(data.weights[held])

    cv_curve = masses @ curves / np.sum(masses)
    best = int(np.argmin(cv_curve)) + 1  # first minimum -> fewest trees
    return CvResult(cv_curve=cv_curve, best_iterations=best, fold_assignments=fold_of)


def train_with_selection(data: Dataset, cfg: TrainConfig):
    """Cross-validate, then train on all rows for the selected iterations.

    Returns ``(model, cv_result)``.  The final model is identical to
    ``train(data, replace(cfg, max_trees=cv.best_iterations))``.
    """
    cv = cross_validate(data, cfg)
    model = train(data, replace(cfg, max_trees=cv.best_iterations))
    return model, cv
