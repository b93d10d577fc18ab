"""Cost-sensitive stochastic gradient boosting for conditional quantiles.

Trains boosted regression trees under an asymmetrically weighted absolute
loss, so the fit targets the alpha-quantile of the response instead of its
center.  Built for small-area imputation workflows: train on sampled
units, impute the rest, aggregate totals, and inspect cost-sensitive
partial dependence and variable influence.
"""

__version__ = "0.1.0"

from .boosting import BoostedModel, load_model, predict, save_model, train
from .data import CsvSchema, Dataset, TrainConfig, cost_ratio_to_alpha, load_csv, save_csv
from .diagnostics import (
    InfluenceReport,
    PartialDependenceGrid,
    baseline_influence,
    partial_dependence,
    relative_influence,
)
from .loss import (
    QuantileLossSpec,
    deviance,
    initial_value,
    negative_gradient,
    terminal_node_estimate,
    weighted_quantile,
)
from .model_selection import CvResult, cross_validate, train_with_selection
from .synth import SynthSpec, generate
from .tree import RegressionTree, fit_tree, predict_tree

__all__ = [
    "__version__",
    "BoostedModel",
    "CsvSchema",
    "CvResult",
    "Dataset",
    "InfluenceReport",
    "PartialDependenceGrid",
    "QuantileLossSpec",
    "RegressionTree",
    "SynthSpec",
    "TrainConfig",
    "baseline_influence",
    "cost_ratio_to_alpha",
    "cross_validate",
    "deviance",
    "fit_tree",
    "generate",
    "initial_value",
    "load_csv",
    "load_model",
    "negative_gradient",
    "partial_dependence",
    "predict",
    "predict_tree",
    "relative_influence",
    "save_csv",
    "save_model",
    "terminal_node_estimate",
    "train",
    "train_with_selection",
    "weighted_quantile",
]
