"""Cost-sensitive model interpretation.

Partial dependence integrates out the other predictors by weighted tree
traversal: at a node splitting on the target predictor the traversal
follows the branch the grid value routes to, at any other node it descends
both children weighted by the training weight fractions recorded at fit
time.  Relative influence is each predictor's share of the total SSE
reduction across all splits.  The permutation baseline retrains the model
with one predictor's column shuffled to estimate how much influence that
predictor earns by chance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._seeds import BASELINE_PERMUTE, derive_rng
from .boosting import BoostedModel
from .data import Dataset, TrainConfig
from .model_selection import train_with_selection
from .tree import RegressionTree

__all__ = [
    "PartialDependenceGrid",
    "InfluenceReport",
    "partial_dependence",
    "relative_influence",
    "baseline_influence",
]


@dataclass
class PartialDependenceGrid:
    predictor: str
    grid: np.ndarray      # equally spaced over the training [min, max]
    response: np.ndarray  # partial-dependence value at each grid point
    deciles: np.ndarray   # training 10th..90th percentiles, for rug marks


@dataclass
class InfluenceReport:
    """Empirical relative influence next to its permutation baseline."""

    empirical: dict
    baseline_mean: dict
    baseline_samples: dict
    replicates: int

    def baseline_sd(self) -> dict:
        # sample sd over replicates; a single replicate has no spread
        out = {}
        for name, values in self.baseline_samples.items():
            v = np.asarray(values, dtype=float)
            out[name] = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
        return out


def _traverse(tree: RegressionTree, target: int, grid: np.ndarray) -> np.ndarray:
    """Weighted traversal value of one tree at every grid point."""
    out = np.zeros(grid.size)

    def descend(node: int, sel: np.ndarray, weight: float) -> None:
        j = tree.predictor[node]
        if j < 0:
            out[sel] += weight * tree.rho[node]
            return
        if j == target:
            go_left = grid[sel] < tree.threshold[node]
            left_sel = sel[go_left]
            right_sel = sel[~go_left]
            if left_sel.size:
                descend(tree.left[node], left_sel, weight)
            if right_sel.size:
                descend(tree.right[node], right_sel, weight)
        else:
            frac = tree.weight_fraction_left[node]
            descend(tree.left[node], sel, weight * frac)
            descend(tree.right[node], sel, weight * (1.0 - frac))

    descend(0, np.arange(grid.size), 1.0)
    return out


def partial_dependence(
    model: BoostedModel,
    predictor: str,
    train: Dataset,
    n_points: int = 100,
) -> PartialDependenceGrid:
    """Partial-dependence profile of one predictor on the response scale.

    The grid spans the predictor's training range at ``n_points`` equally
    spaced values, independent of its empirical density; the returned
    decile positions let plots flag sparsely supported regions.
    """
    if predictor not in model.predictor_names:
        raise ValueError(f"unknown predictor {predictor!r}")
    if n_points < 2:
        raise ValueError(f"n_points must be >= 2, got {n_points}")
    target = model.predictor_names.index(predictor)
    col = train.column(predictor)
    lo = float(col.min())
    hi = float(col.max())
    if lo == hi:  # constant column: a single-point profile
        grid = np.array([lo])
    else:
        grid = np.linspace(lo, hi, n_points)

    total = np.zeros(grid.size)
    for tree in model.trees:
        total += _traverse(tree, target, grid)
    values = model.f0 + model.learning_rate * total
    deciles = np.percentile(col, np.arange(10, 100, 10))
    return PartialDependenceGrid(
        predictor=predictor, grid=grid, response=values, deciles=deciles
    )


def relative_influence(model: BoostedModel, n_trees: Optional[int] = None) -> dict:
    """Percentage of the total split SSE reduction earned per predictor.

    Sums each internal node's recorded improvement over the first
    ``n_trees`` trees, grouped by split predictor, normalized to 100.
    A model with no splits has no defined shares and reports zeros.
    """
    if n_trees is None:
        n_trees = model.n_trees
    if not (0 <= n_trees <= model.n_trees):
        raise ValueError(f"n_trees must lie in [0, {model.n_trees}], got {n_trees}")
    totals = np.zeros(len(model.predictor_names))
    for tree in model.trees[:n_trees]:
        internal = tree.predictor >= 0
        np.add.at(totals, tree.predictor[internal], tree.improvement[internal])
    grand = totals.sum()
    if grand <= 0.0:
        warnings.warn("model has no splits; relative influence is undefined (all zeros)")
        return {name: 0.0 for name in model.predictor_names}
    shares = totals / grand * 100.0
    return {name: float(s) for name, s in zip(model.predictor_names, shares)}


def baseline_influence(data: Dataset, cfg: TrainConfig, replicates: int) -> InfluenceReport:
    """Empirical influence plus its chance-level permutation baseline.

    For each predictor and replicate, that predictor's column is shuffled
    (all others untouched), the full selection-and-training procedure is
    re-run with the same tuning parameters, and the shuffled predictor's
    relative influence is recorded; the baseline is the replicate mean.
    Permutation streams are keyed by (seed, predictor, replicate), so
    adding replicates never changes earlier ones.
    """
    if replicates < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates}")
    if data.response is None:
        raise ValueError("baseline influence requires a response column")

    model, _ = train_with_selection(data, cfg)
    empirical = relative_influence(model)

    n = data.n_rows
    samples: dict = {name: np.empty(replicates) for name in data.predictor_names}
    for j, name in enumerate(data.predictor_names):
        for r in range(replicates):
            rng = derive_rng(cfg.seed, BASELINE_PERMUTE, j, r)
            shuffled = data.predictors.copy()
            shuffled[:, j] = shuffled[rng.permutation(n), j]
            permuted_model, _ = train_with_selection(data.with_predictors(shuffled), cfg)
            samples[name][r] = relative_influence(permuted_model)[name]

    means = {name: float(np.mean(vals)) for name, vals in samples.items()}
    return InfluenceReport(
        empirical=empirical,
        baseline_mean=means,
        baseline_samples=samples,
        replicates=replicates,
    )
