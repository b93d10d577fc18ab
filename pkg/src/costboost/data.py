"""Dataset container, CSV ingestion, and the cost-ratio/alpha conversion.

A :class:`Dataset` holds an N x P predictor matrix with named columns, an
optional response vector, strictly positive per-row population weights,
opaque row identifiers, and optional stratum labels.  Rows keep their file
order; the seeded subsampler relies on it for reproducibility.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "Dataset",
    "CsvSchema",
    "TrainConfig",
    "load_csv",
    "save_csv",
    "cost_ratio_to_alpha",
]


def cost_ratio_to_alpha(under_cost: float, over_cost: float) -> float:
    """Convert an under/over misestimation cost pair to the asymmetry alpha.

    A ``U to V`` cost ratio means underestimating is ``U/V`` times as costly
    as overestimating, and the loss-minimizing fit is the ``U/(U+V)``
    quantile of the response.  Both costs must be strictly positive.
    """
    u = float(under_cost)
    v = float(over_cost)
    if not (math.isfinite(u) and u > 0.0):
        raise ValueError(f"under_cost must be a positive finite number, got {under_cost!r}")
    if not (math.isfinite(v) and v > 0.0):
        raise ValueError(f"over_cost must be a positive finite number, got {over_cost!r}")
    return u / (u + v)


@dataclass
class TrainConfig:
    """Tuning parameters of the boosting run.

    Defaults suit slow, well-regularized fitting of modest survey samples:
    10 splits per tree with at least 5 rows per terminal node, learning
    rate 0.001, at most 6000 trees, a 50 percent subsample rounded to the
    nearest whole number of rows, and 10-fold cross-validation.
    """

    alpha: float
    learning_rate: float = 0.001
    max_trees: int = 6000
    splits_per_tree: int = 10
    min_node_size: int = 5
    subsample_fraction: float = 0.5
    cv_folds: int = 10
    seed: int = 17

    def __post_init__(self) -> None:
        if not (isinstance(self.alpha, (int, float)) and 0.0 < float(self.alpha) < 1.0):
            raise ValueError(f"alpha must lie strictly inside (0, 1), got {self.alpha!r}")
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0.0):
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate!r}")
        if int(self.max_trees) < 1:
            raise ValueError(f"max_trees must be >= 1, got {self.max_trees!r}")
        if int(self.splits_per_tree) < 1:
            raise ValueError(f"splits_per_tree must be >= 1, got {self.splits_per_tree!r}")
        if int(self.min_node_size) < 1:
            raise ValueError(f"min_node_size must be >= 1, got {self.min_node_size!r}")
        if not (0.0 < self.subsample_fraction <= 1.0):
            raise ValueError(
                f"subsample_fraction must lie in (0, 1], got {self.subsample_fraction!r}"
            )
        if int(self.cv_folds) < 2:
            raise ValueError(f"cv_folds must be >= 2, got {self.cv_folds!r}")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")

    def subsample_size(self, n_rows: int) -> int:
        """Rows drawn per iteration: fraction of N rounded to the nearest
        whole number (half rounds up, so 132.5 -> 133), clamped to [1, N]."""
        n_prime = int(math.floor(self.subsample_fraction * n_rows + 0.5))
        return max(1, min(n_prime, n_rows))

    def as_dict(self) -> dict:
        return {
            "alpha": float(self.alpha),
            "learning_rate": float(self.learning_rate),
            "max_trees": int(self.max_trees),
            "splits_per_tree": int(self.splits_per_tree),
            "min_node_size": int(self.min_node_size),
            "subsample_fraction": float(self.subsample_fraction),
            "cv_folds": int(self.cv_folds),
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**{k: d[k] for k in (
            "alpha", "learning_rate", "max_trees", "splits_per_tree",
            "min_node_size", "subsample_fraction", "cv_folds", "seed")})


@dataclass
class Dataset:
    """Immutable table of predictors plus optional response, weights,
    row identifiers and stratum labels.

    Invariants enforced at construction: N >= 1, P >= 1, unique predictor
    names, no missing (non-finite) predictor or response values, and
    strictly positive finite weights.
    """

    predictors: np.ndarray
    predictor_names: tuple
    response: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    row_ids: Optional[tuple] = None
    stratum: Optional[tuple] = None

    def __post_init__(self) -> None:
        X = np.asarray(self.predictors, dtype=float)
        if X.ndim != 2:
            raise ValueError("predictors must be a 2-D matrix")
        n, p = X.shape
        if n < 1 or p < 1:
            raise ValueError(f"need at least one row and one predictor, got shape {X.shape}")
        names = tuple(str(c) for c in self.predictor_names)
        if len(names) != p:
            raise ValueError(f"{len(names)} predictor names for {p} columns")
        if len(set(names)) != len(names):
            raise ValueError("duplicate predictor names")
        if not np.isfinite(X).all():
            raise ValueError("missing or non-finite predictor value")

        if self.response is not None:
            y = np.asarray(self.response, dtype=float)
            if y.shape != (n,):
                raise ValueError("response length does not match predictor rows")
            if not np.isfinite(y).all():
                raise ValueError("missing or non-finite response value")
            y.flags.writeable = False
            self.response = y

        w = np.ones(n) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != (n,):
            raise ValueError("weights length does not match predictor rows")
        if not np.isfinite(w).all() or (w <= 0.0).any():
            raise ValueError("non-positive weight")

        ids = tuple(str(i) for i in range(n)) if self.row_ids is None \
            else tuple(str(r) for r in self.row_ids)
        if len(ids) != n:
            raise ValueError("row_ids length does not match predictor rows")
        if self.stratum is not None:
            strata = tuple(str(s) for s in self.stratum)
            if len(strata) != n:
                raise ValueError("stratum length does not match predictor rows")
            self.stratum = strata

        X.flags.writeable = False
        w.flags.writeable = False
        self.predictors = X
        self.predictor_names = names
        self.weights = w
        self.row_ids = ids

    @property
    def n_rows(self) -> int:
        return self.predictors.shape[0]

    @property
    def n_predictors(self) -> int:
        return self.predictors.shape[1]

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.predictor_names.index(name)
        except ValueError:
            raise ValueError(f"unknown predictor {name!r}") from None
        return self.predictors[:, j]

    def take(self, indices: Sequence[int]) -> "Dataset":
        """Row subset, preserving the given order."""
        idx = np.asarray(indices, dtype=int)
        return Dataset(
            predictors=self.predictors[idx],
            predictor_names=self.predictor_names,
            response=None if self.response is None else self.response[idx],
            weights=self.weights[idx],
            row_ids=tuple(self.row_ids[i] for i in idx),
            stratum=None if self.stratum is None else tuple(self.stratum[i] for i in idx),
        )

    def with_predictors(self, matrix: np.ndarray) -> "Dataset":
        """Same rows and metadata, different predictor values."""
        return Dataset(
            predictors=matrix,
            predictor_names=self.predictor_names,
            response=self.response,
            weights=self.weights,
            row_ids=self.row_ids,
            stratum=self.stratum,
        )


@dataclass(frozen=True)
class CsvSchema:
    """Column-role mapping for :func:`load_csv`.

    ``predictors=None`` assigns every column without another role to the
    predictor set.
    """

    response: Optional[str] = None
    weight: Optional[str] = None
    row_id: Optional[str] = None
    stratum: Optional[str] = None
    predictors: Optional[tuple] = None


def _parse_number(cell: str, column: str, line: int) -> float:
    text = cell.strip()
    if text == "":
        raise ValueError(f"missing value in column {column!r}, line {line}")
    try:
        value = float(text)
    except ValueError:
        raise ValueError(
            f"non-numeric value {cell!r} in column {column!r}, line {line}"
        ) from None
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {cell!r} in column {column!r}, line {line}")
    return value


def load_csv(path: str, schema: CsvSchema) -> Dataset:
    """Read an RFC-4180 style CSV with a mandatory header row into a Dataset.

    Numeric columns accept integer, decimal and scientific notation.  Any
    missing cell, non-numeric cell in a numeric column, duplicate header
    name, or non-positive weight is an error.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file (header row required)") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            dupes = sorted({h for h in header if header.count(h) > 1})
            raise ValueError(f"{path}: duplicate column names {dupes}")

        roles = {}
        for role, name in (("response", schema.response), ("weight", schema.weight),
                           ("row_id", schema.row_id), ("stratum", schema.stratum)):
            if name is not None:
                if name not in header:
                    raise ValueError(f"{path}: {role} column {name!r} not in header")
                roles[name] = role

        if schema.predictors is not None:
            predictor_names = [str(c) for c in schema.predictors]
            for c in predictor_names:
                if c not in header:
                    raise ValueError(f"{path}: predictor column {c!r} not in header")
                if c in roles:
                    raise ValueError(f"{path}: column {c!r} is both predictor and {roles[c]}")
        else:
            predictor_names = [c for c in header if c not in roles]
        if not predictor_names:
            raise ValueError(f"{path}: no predictor columns")

        col_index = {c: header.index(c) for c in header}
        pred_idx = [col_index[c] for c in predictor_names]
        resp_idx = col_index[schema.response] if schema.response else None
        w_idx = col_index[schema.weight] if schema.weight else None
        id_idx = col_index[schema.row_id] if schema.row_id else None
        strat_idx = col_index[schema.stratum] if schema.stratum else None

        X_rows, y_rows, w_rows, ids, strata = [], [], [], [], []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: line {line_no} has {len(row)} fields, expected {len(header)}"
                )
            X_rows.append([_parse_number(row[j], header[j], line_no) for j in pred_idx])
            if resp_idx is not None:
                y_rows.append(_parse_number(row[resp_idx], header[resp_idx], line_no))
            if w_idx is not None:
                w = _parse_number(row[w_idx], header[w_idx], line_no)
                if w <= 0.0:
                    raise ValueError(
                        f"{path}: non-positive weight {row[w_idx]!r} at line {line_no}"
                    )
                w_rows.append(w)
            ids.append(row[id_idx] if id_idx is not None else str(line_no - 2))
            if strat_idx is not None:
                strata.append(row[strat_idx])

    if not X_rows:
        raise ValueError(f"{path}: no data rows")
    return Dataset(
        predictors=np.array(X_rows, dtype=float),
        predictor_names=tuple(predictor_names),
        response=np.array(y_rows) if resp_idx is not None else None,
        weights=np.array(w_rows) if w_idx is not None else None,
        row_ids=tuple(ids),
        stratum=tuple(strata) if strat_idx is not None else None,
    )


def _fmt(value: float) -> str:
    # repr() of a Python float is the shortest string that parses back
    # to the identical double, so save -> load is lossless.
    return repr(float(value))


def save_csv(data: Dataset, path: str, extra_columns: Optional[dict] = None) -> CsvSchema:
    """Write a Dataset to CSV so that reloading reproduces it exactly.

    Column layout: ``row_id``, predictors, then ``response`` / ``weight`` /
    ``stratum`` where present, then any ``extra_columns``.  Returns the
    schema that reads the file back.
    """
    extra = extra_columns or {}
    header = ["row_id", *data.predictor_names]
    if data.response is not None:
        header.append("response")
    header.append("weight")
    if data.stratum is not None:
        header.append("stratum")
    header.extend(extra.keys())

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(data.n_rows):
            row = [data.row_ids[i]]
            row.extend(_fmt(v) for v in data.predictors[i])
            if data.response is not None:
                row.append(_fmt(data.response[i]))
            row.append(_fmt(data.weights[i]))
            if data.stratum is not None:
                row.append(data.stratum[i])
            for col in extra.values():
                row.append(_fmt(col[i]))
            writer.writerow(row)

    return CsvSchema(
        response="response" if data.response is not None else None,
        weight="weight",
        row_id="row_id",
        stratum="stratum" if data.stratum is not None else None,
        predictors=data.predictor_names,
    )
